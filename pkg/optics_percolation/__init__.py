"""
Classical simulation of noisy constant-depth linear-optical circuits.

Loss or distinguishability removes input photons from the lightcone graph of
the circuit; below the percolation threshold the remaining graph splits into
small components that are simulated exactly one at a time.
"""

from .circuit_graph import (
    BeamSplitter,
    BipartiteGraph,
    Circuit,
    InputSpec,
    bs_unitary,
    build_unitary,
    gen_1d,
    gen_nonlocal,
    lightcone_bipartite,
    max_degree,
)
from .errors import (
    BoundViolationError,
    ParameterError,
    ResourceError,
    RestartLimitError,
    SimulationError,
    StructureError,
    SupercriticalError,
    ThresholdRefusalError,
    UnsupportedNoiseError,
)
from .mps import evolve_circuit, mps_sample, schmidt_rank_check
from .noise import NoiseKind, NoiseSpec, classical_threshold
from .percolation import (
    ComponentSet,
    connected_components,
    percolation_experiment,
    remove_vertices,
    tail_bound,
    y_star,
)
from .sampler import (
    PercolationSampler,
    SampleRecord,
    brute_force_oracle,
    full_noisy_sample,
    hilbert_dim_bound,
    permanent,
    sample_component,
    tvd,
)
from .utils import ARTIFACT_VERSION

__version__ = ARTIFACT_VERSION
