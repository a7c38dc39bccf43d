#!/usr/bin/env python3

"""
Exact sampling of small interfering components and the percolation sampler.

A noisy run draws a noise pattern (which photons survive, or which photons
stay indistinguishable), splits the interfering photons into lightcone
components, restarts when a component is larger than the cap y*, and samples
every component exactly from permanents of its sub-unitary. Distinguishable
photons travel alone with probabilities |U_vw|^2.

The brute-force oracles enumerate every noise pattern on the full unitary
and give the exact output distribution of small instances.
"""

import math
import logging
import itertools
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from tqdm import tqdm

from .circuit_graph import Circuit, InputSpec, build_unitary, lightcone_bipartite
from .errors import (
    ParameterError,
    ResourceError,
    RestartLimitError,
    StructureError,
    ThresholdRefusalError,
    UnsupportedNoiseError,
)
from .noise import (
    NoiseKind,
    NoiseSpec,
    classical_threshold,
    sample_distinguishability,
    sample_loss_counts,
    sample_loss_single,
)
from .percolation import connected_components, y_star as cap_for_epsilon
from .utils import as_generator, njit, stream_rng

logger = logging.getLogger(__name__)

MAX_PERMANENT_SIZE = 30
DEFAULT_OUTCOME_CAP = 10 ** 6
DEFAULT_TABLE_CAP = 4096
ORACLE_MAX_INPUTS = 5
ORACLE_MAX_MODES = 10

Distribution = Dict[Tuple[int, ...], float]


@njit(cache=True)
def _ryser_gray(a):
    n = a.shape[0]
    row_sums = np.zeros(n, dtype=np.complex128)
    included = np.zeros(n, dtype=np.bool_)
    total = 0j
    size = 0
    for k in range(1, 1 << n):
        j = 0
        while not (k >> j) & 1:
            j += 1
        if included[j]:
            included[j] = False
            size -= 1
            for i in range(n):
                row_sums[i] -= a[i, j]
        else:
            included[j] = True
            size += 1
            for i in range(n):
                row_sums[i] += a[i, j]
        prod = 1.0 + 0j
        for i in range(n):
            prod *= row_sums[i]
        if size % 2 == 1:
            total -= prod
        else:
            total += prod
    if n % 2 == 1:
        total = -total
    return total


def _ryser_int(rows: List[List[int]]) -> int:
    n = len(rows)
    row_sums = [0] * n
    included = [False] * n
    total = 0
    size = 0
    for k in range(1, 1 << n):
        j = (k & -k).bit_length() - 1
        step = -1 if included[j] else 1
        included[j] = not included[j]
        size += step
        for i in range(n):
            row_sums[i] += step * rows[i][j]
        prod = 1
        for value in row_sums:
            prod *= value
        total += -prod if size % 2 else prod
    return -total if n % 2 else total


def _check_square(matrix: np.ndarray) -> int:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise StructureError(f"Permanent needs a square matrix, got shape {matrix.shape}")
    n = matrix.shape[0]
    if n > MAX_PERMANENT_SIZE:
        raise ResourceError(f"Permanent of a {n}x{n} matrix exceeds the {MAX_PERMANENT_SIZE} cap")
    return n


def permanent(matrix):
    """Permanent via Ryser's formula over a Gray-code subset walk, O(k 2^k).

    Integer matrices are evaluated in exact integer arithmetic and return an
    ``int``; everything else returns a complex number. The empty matrix has
    permanent 1.
    """
    matrix = np.asarray(matrix)
    n = _check_square(matrix)
    if n == 0:
        return 1 if np.issubdtype(matrix.dtype, np.integer) else 1.0 + 0j
    if np.issubdtype(matrix.dtype, np.integer) or matrix.dtype == bool:
        return _ryser_int([[int(v) for v in row] for row in matrix])
    return complex(_ryser_gray(np.ascontiguousarray(matrix, dtype=np.complex128)))


def permanent_naive(matrix):
    """Sum over all permutations; reference for small matrices only."""
    matrix = np.asarray(matrix)
    n = _check_square(matrix)
    total = 0
    for sigma in itertools.permutations(range(n)):
        prod = 1
        for i in range(n):
            prod *= matrix[i, sigma[i]]
        total += prod
    return total


def _occupations(vector, length: int, name: str) -> np.ndarray:
    vector = np.asarray(vector, dtype=np.int64).reshape(-1)
    if vector.size != length:
        raise StructureError(f"{name} has {vector.size} entries, expected {length}")
    if (vector < 0).any():
        raise ParameterError(f"{name} has negative photon counts: {vector.tolist()}")
    return vector


def outcome_probability(u_comp: np.ndarray, inputs, outcome) -> float:
    """|Per(U_{s,m})|^2 / (prod m_j! prod s_i!) with rows of u_comp as inputs."""
    u_comp = np.asarray(u_comp)
    s = _occupations(inputs, u_comp.shape[0], "Input occupation")
    m = _occupations(outcome, u_comp.shape[1], "Outcome occupation")
    if s.sum() != m.sum():
        raise ParameterError(f"Photon number mismatch: {int(s.sum())} in, {int(m.sum())} out")
    rows = np.repeat(np.arange(s.size), s)
    cols = np.repeat(np.arange(m.size), m)
    amplitude = permanent(u_comp[np.ix_(rows, cols)].astype(np.complex128))
    norm = math.prod(math.factorial(int(k)) for k in s) * math.prod(
        math.factorial(int(k)) for k in m
    )
    return float(abs(amplitude) ** 2 / norm)


def num_outcomes(n_photons: int, n_modes: int) -> int:
    if n_photons == 0:
        return 1
    return math.comb(n_photons + n_modes - 1, n_photons)


def _enumerate_outcomes(n_photons: int, n_modes: int) -> Iterator[Tuple[int, ...]]:
    for placement in itertools.combinations_with_replacement(range(n_modes), n_photons):
        counts = np.bincount(np.asarray(placement, dtype=np.int64), minlength=n_modes)
        yield tuple(int(c) for c in counts)


def exact_component_distribution(
    u_comp: np.ndarray, inputs, cap: int = DEFAULT_OUTCOME_CAP
) -> Distribution:
    """Every outcome over the columns of u_comp with its probability.

    Raises:
        ResourceError: the outcome space is larger than ``cap``.
    """
    u_comp = np.asarray(u_comp)
    s = _occupations(inputs, u_comp.shape[0], "Input occupation")
    n = int(s.sum())
    count = num_outcomes(n, u_comp.shape[1])
    if count > cap:
        raise ResourceError(
            f"{count} outcomes for {n} photons on {u_comp.shape[1]} modes exceed the cap of "
            f"{cap}; use sample_component instead"
        )
    return {m: outcome_probability(u_comp, s, m) for m in _enumerate_outcomes(n, u_comp.shape[1])}


def _chain_rule_sample(a: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # a has orthonormal columns, one per photon. Photons are revealed one at a
    # time in a random order; the weight of output i after k photons is
    # |Per(a[rows + [i], :k])|^2, expanded along the new row.
    n_modes, n = a.shape
    a = a[:, rng.permutation(n)]
    rows: List[int] = []
    for k in range(1, n + 1):
        minors = np.empty(k, dtype=np.complex128)
        for l in range(k):
            cols = [c for c in range(k) if c != l]
            minors[l] = permanent(a[np.ix_(rows, cols)].astype(np.complex128))
        weights = np.abs(a[:, :k] @ minors) ** 2
        rows.append(int(rng.choice(n_modes, p=weights / weights.sum())))
    return np.bincount(np.array(rows, dtype=np.int64), minlength=n_modes)


class OutcomeTable:
    """Exact outcome table prepared for repeated inverse-CDF draws."""

    def __init__(self, distribution: Distribution):
        self.outcomes = np.array(list(distribution), dtype=np.int64)
        probs = np.array(list(distribution.values()), dtype=float)
        self.cdf = np.cumsum(probs / probs.sum())

    def __len__(self) -> int:
        return len(self.outcomes)

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        k = int(np.searchsorted(self.cdf, rng.random(), side="right"))
        return self.outcomes[min(k, len(self.outcomes) - 1)]


def sample_component(
    u_comp: np.ndarray, inputs, rng=None, cap: int = DEFAULT_OUTCOME_CAP
) -> np.ndarray:
    """One exact outcome over the columns of u_comp.

    Single-photon inputs use sequential photon-by-photon sampling with no
    enumeration; multi-photon Fock inputs sample from the exact table.
    """
    rng = as_generator(rng)
    u_comp = np.asarray(u_comp)
    s = _occupations(inputs, u_comp.shape[0], "Input occupation")
    if s.sum() == 0:
        return np.zeros(u_comp.shape[1], dtype=np.int64)
    if s.max() <= 1:
        photon_rows = np.flatnonzero(s)
        return _chain_rule_sample(u_comp[photon_rows, :].T.astype(np.complex128), rng)
    return OutcomeTable(exact_component_distribution(u_comp, s, cap)).draw(rng)


def sample_distinguishable(u: np.ndarray, source_mode: int, rng=None) -> int:
    """Output mode of a classical photon entering ``source_mode``, P(w) = |U_vw|^2."""
    rng = as_generator(rng)
    u = np.asarray(u)
    if not 0 <= source_mode < u.shape[0]:
        raise ParameterError(f"Source mode {source_mode} outside [0, {u.shape[0]})")
    probs = np.abs(u[source_mode]) ** 2
    return int(rng.choice(probs.size, p=probs / probs.sum()))


@dataclass(frozen=True)
class SampleRecord:
    outcome: Tuple[int, ...]
    lost_photons: int
    restarts: int
    component_sizes: Tuple[int, ...]
    # photons routed classically, outside every interfering component
    distinguishable: int = 0

    def to_dict(self) -> dict:
        return {
            "outcome": list(self.outcome),
            "lost": self.lost_photons,
            "restarts": self.restarts,
            "component_sizes": list(self.component_sizes),
            "distinguishable": self.distinguishable,
        }


@dataclass
class NoisePattern:
    """Surviving photons per input vertex and which of them interfere."""

    counts: np.ndarray
    interfering: np.ndarray
    distinguishable: np.ndarray

    @property
    def interfering_counts(self) -> np.ndarray:
        return np.where(self.interfering, self.counts, 0)


def _check_noise_input(noise: NoiseSpec, input_spec: InputSpec) -> None:
    if noise.kind is NoiseKind.BOTH:
        raise UnsupportedNoiseError(
            "Combined loss and distinguishability has no analysed threshold"
        )
    if noise.kind is NoiseKind.DISTINGUISHABILITY and not input_spec.is_single_photon:
        raise ParameterError("The distinguishability model needs single-photon inputs")


def _draw_noise(
    input_spec: InputSpec, noise: NoiseSpec, eta: float, rng: np.random.Generator
) -> NoisePattern:
    counts = input_spec.counts
    if noise.kind is NoiseKind.DISTINGUISHABILITY:
        indistinguishable = sample_distinguishability(input_spec.num_inputs, noise.x, rng)
        return NoisePattern(counts, indistinguishable, ~indistinguishable)
    if input_spec.is_single_photon:
        survived = sample_loss_single(input_spec, eta, rng).astype(np.int64)
    else:
        survived = sample_loss_counts(input_spec, eta, rng)
    return NoisePattern(survived, survived > 0, np.zeros(input_spec.num_inputs, dtype=bool))


def _enumerate_noise(
    input_spec: InputSpec, noise: NoiseSpec, eta: float
) -> Iterator[Tuple[float, NoisePattern]]:
    counts = input_spec.counts
    if noise.kind is NoiseKind.DISTINGUISHABILITY:
        for bits in itertools.product((False, True), repeat=input_spec.num_inputs):
            mask = np.array(bits, dtype=bool)
            k = int(mask.sum())
            weight = noise.x ** k * (1.0 - noise.x) ** (mask.size - k)
            yield weight, NoisePattern(counts, mask, ~mask)
        return
    for survived in itertools.product(*(range(int(n) + 1) for n in counts)):
        survived = np.array(survived, dtype=np.int64)
        weight = float(np.prod(stats.binom.pmf(survived, counts, eta)))
        yield weight, NoisePattern(survived, survived > 0, np.zeros(counts.size, dtype=bool))


class PercolationSampler:
    """Noisy sampler for one circuit, input and noise model.

    The unitary, lightcone graph and component cap are prepared once; every
    draw resamples only the noise pattern until all interfering components
    fit under the cap.

    Args:
        circuit: the interferometer.
        input_spec: occupied input modes.
        noise: loss or distinguishability parameters.
        epsilon: failure budget; the emitted distribution is within TVD 2*epsilon.
        y_star: explicit component cap replacing the bound-derived one.
        force: sample configurations that fail the threshold with no cap.
        table_cap: largest component outcome space kept as a cached exact
            table; 0 disables the cache.
    """

    def __init__(
        self,
        circuit: Circuit,
        input_spec: InputSpec,
        noise: NoiseSpec,
        epsilon: float = 0.01,
        y_star: Optional[float] = None,
        force: bool = False,
        table_cap: int = DEFAULT_TABLE_CAP,
    ):
        if not 0.0 < epsilon < 1.0:
            raise ParameterError(f"epsilon must lie in (0, 1), got {epsilon}")
        _check_noise_input(noise, input_spec)
        self.circuit = circuit
        self.input_spec = input_spec
        self.noise = noise
        self.epsilon = epsilon
        self.table_cap = table_cap
        self.eta = noise.effective_eta(circuit.depth)
        self.unitary = build_unitary(circuit)
        self.graph = lightcone_bipartite(circuit, input_spec)
        self.delta = self.graph.delta
        self.max_restarts = math.ceil(1e3 / (1.0 - epsilon))
        self.threshold = None
        self.y_star = self._component_cap(y_star, force)
        self._tables: Dict[tuple, OutcomeTable] = {}
        self.samples_drawn = 0
        self.total_restarts = 0

    def _component_cap(self, override: Optional[float], force: bool) -> float:
        if override is not None:
            if override < 0:
                raise ParameterError(f"y_star must be >= 0, got {override}")
            return float(override)
        if self.input_spec.num_inputs == 0:
            return math.inf
        fock_n = self.input_spec.max_photon if self.input_spec.max_photon > 1 else None
        self.threshold = classical_threshold(
            self.delta, self.noise, fock_n=fock_n, depth=self.circuit.depth
        )
        if self.threshold.simulable:
            parameter = self.noise.percolation_parameter(self.circuit.depth, fock_n)
            return cap_for_epsilon(self.input_spec.num_inputs, self.epsilon, parameter, self.delta)
        if force:
            logger.warning(
                f"Threshold fails (load={self.threshold.load:.4g}); sampling without a component cap"
            )
            return math.inf
        raise ThresholdRefusalError(
            f"{self.threshold.condition} load {self.threshold.load:.6g} >= 1 with delta="
            f"{self.delta}: not classically simulable by percolation (use force to override)"
        )

    @property
    def restart_rate(self) -> float:
        """Fraction of noise patterns rejected, an estimate of p(E^perp)."""
        attempts = self.samples_drawn + self.total_restarts
        return self.total_restarts / attempts if attempts else 0.0

    @property
    def overhead(self) -> float:
        """Noise patterns drawn per emitted sample, an estimate of 1/p(E)."""
        if not self.samples_drawn:
            return 1.0
        return (self.samples_drawn + self.total_restarts) / self.samples_drawn

    def _component_outcome(
        self, a_ids: Tuple[int, ...], b_ids: Tuple[int, ...], counts: np.ndarray, rng
    ) -> np.ndarray:
        sub = self.unitary[np.ix_(a_ids, b_ids)]
        if self.table_cap and num_outcomes(int(counts.sum()), len(b_ids)) <= self.table_cap:
            key = (a_ids, tuple(int(c) for c in counts))
            table = self._tables.get(key)
            if table is None:
                table = OutcomeTable(exact_component_distribution(sub, counts))
                self._tables[key] = table
            return table.draw(rng)
        return sample_component(sub, counts, rng)

    def draw(self, rng=None) -> SampleRecord:
        rng = as_generator(rng)
        restarts = 0
        while True:
            pattern = _draw_noise(self.input_spec, self.noise, self.eta, rng)
            components = connected_components(self.graph, pattern.interfering)
            if components.max_size <= self.y_star:
                break
            restarts += 1
            if restarts > self.max_restarts:
                raise RestartLimitError(
                    f"{restarts} restarts for one sample exceed 10^3/(1-eps) = "
                    f"{self.max_restarts}; y*={self.y_star:.4g} is set too low"
                )

        modes = self.input_spec.modes
        position = {mode: k for k, mode in enumerate(modes)}
        outcome = np.zeros(self.circuit.num_modes, dtype=np.int64)
        for component in components:
            counts = np.array([pattern.counts[position[a]] for a in component.a_ids])
            outcome[list(component.b_ids)] += self._component_outcome(
                component.a_ids, component.b_ids, counts, rng
            )
        for k in np.flatnonzero(pattern.distinguishable):
            outcome[sample_distinguishable(self.unitary, modes[k], rng)] += 1

        sizes = [component.size for component in components]
        self.samples_drawn += 1
        self.total_restarts += restarts
        return SampleRecord(
            tuple(int(c) for c in outcome),
            self.input_spec.n_photons - int(pattern.counts.sum()),
            restarts,
            tuple(sizes),
            int(pattern.distinguishable.sum()),
        )

    def sample(self, num_samples: int, seed: int = 0, progress: bool = False) -> List[SampleRecord]:
        """Draw ``num_samples`` records; sample k uses the stream (seed, k)."""
        if num_samples < 0:
            raise ParameterError(f"num_samples must be >= 0, got {num_samples}")
        return [
            self.draw(stream_rng(seed, k))
            for k in tqdm(range(num_samples), disable=not progress, desc="sample")
        ]

    def summary(self) -> dict:
        return {
            "samples": self.samples_drawn,
            "restarts": self.total_restarts,
            "restart_rate": self.restart_rate,
            "overhead": self.overhead,
            "epsilon": self.epsilon,
            "tvd_guarantee": 2 * self.epsilon,
            "y_star": None if math.isinf(self.y_star) else self.y_star,
            "delta": self.delta,
            "eta": self.eta,
            "x": self.noise.x,
            "kind": self.noise.kind.value,
        }


def full_noisy_sample(
    circuit: Circuit,
    input_spec: InputSpec,
    noise: NoiseSpec,
    epsilon: float,
    rng=None,
    y_star: Optional[float] = None,
    force: bool = False,
) -> SampleRecord:
    """One noisy sample; build a :class:`PercolationSampler` to draw many."""
    sampler = PercolationSampler(circuit, input_spec, noise, epsilon, y_star=y_star, force=force)
    return sampler.draw(rng)


def _check_oracle_size(circuit: Circuit, input_spec: InputSpec) -> None:
    if input_spec.num_inputs > ORACLE_MAX_INPUTS or circuit.num_modes > ORACLE_MAX_MODES:
        raise ResourceError(
            f"Oracle limited to N <= {ORACLE_MAX_INPUTS} inputs and M <= {ORACLE_MAX_MODES} "
            f"modes, got N={input_spec.num_inputs}, M={circuit.num_modes}"
        )


def _convolve(p: Distribution, q: Distribution) -> Distribution:
    out: Dict[Tuple[int, ...], float] = {}
    for m1, w1 in p.items():
        for m2, w2 in q.items():
            key = tuple(a + b for a, b in zip(m1, m2))
            out[key] = out.get(key, 0.0) + w1 * w2
    return out


def _pattern_distribution(u: np.ndarray, input_spec: InputSpec, pattern: NoisePattern) -> Distribution:
    modes = np.array(input_spec.modes, dtype=np.int64)
    counts = pattern.interfering_counts
    occupied = counts > 0
    dist = exact_component_distribution(u[modes[occupied], :], counts[occupied])
    for k in np.flatnonzero(pattern.distinguishable):
        probs = np.abs(u[modes[k]]) ** 2
        single = {
            tuple(int(w == j) for j in range(u.shape[1])): float(probs[w])
            for w in range(u.shape[1])
        }
        dist = _convolve(dist, single)
    return dist


def _mix(total: Dict[Tuple[int, ...], float], dist: Distribution, weight: float) -> None:
    for m, p in dist.items():
        total[m] = total.get(m, 0.0) + weight * p


def brute_force_oracle(circuit: Circuit, input_spec: InputSpec, noise: NoiseSpec) -> Distribution:
    """Exact noisy output distribution, enumerating every noise pattern."""
    _check_oracle_size(circuit, input_spec)
    _check_noise_input(noise, input_spec)
    u = build_unitary(circuit)
    eta = noise.effective_eta(circuit.depth)
    total: Dict[Tuple[int, ...], float] = {}
    for weight, pattern in _enumerate_noise(input_spec, noise, eta):
        if weight > 0.0:
            _mix(total, _pattern_distribution(u, input_spec, pattern), weight)
    return total


def conditioned_oracle(
    circuit: Circuit, input_spec: InputSpec, noise: NoiseSpec, y_cap: float
) -> Tuple[Distribution, float]:
    """Exact p(.|E) and p(E^perp), E being "every interfering component has size <= y_cap"."""
    _check_oracle_size(circuit, input_spec)
    _check_noise_input(noise, input_spec)
    u = build_unitary(circuit)
    graph = lightcone_bipartite(circuit, input_spec)
    eta = noise.effective_eta(circuit.depth)
    accepted: Dict[Tuple[int, ...], float] = {}
    p_fail = 0.0
    for weight, pattern in _enumerate_noise(input_spec, noise, eta):
        if weight == 0.0:
            continue
        if connected_components(graph, pattern.interfering).max_size > y_cap:
            p_fail += weight
            continue
        _mix(accepted, _pattern_distribution(u, input_spec, pattern), weight)
    p_accept = 1.0 - p_fail
    if p_accept <= 0.0:
        raise ParameterError(f"No noise pattern satisfies the cap y={y_cap}")
    return {m: p / p_accept for m, p in accepted.items()}, p_fail


def empirical_distribution(outcomes: Sequence[Sequence[int]]) -> Distribution:
    counter = Counter(tuple(int(c) for c in m) for m in outcomes)
    total = sum(counter.values())
    return {m: n / total for m, n in counter.items()}


def tvd(p: Mapping, q: Mapping) -> float:
    """Half the L1 distance between two distributions keyed by outcome."""
    support = set(p) | set(q)
    return 0.5 * sum(abs(p.get(m, 0.0) - q.get(m, 0.0)) for m in support)


@dataclass(frozen=True)
class HilbertBound:
    exact: int
    relaxation: float


def hilbert_dim_bound(y_star: float, delta: int, n_max: int = 1) -> HilbertBound:
    """Outcome-space size binom(D*y + n*y - 1, n*y) of a capped component.

    The relaxation is (e(D + n)/n)^(n*y), i.e. [e(D + 1)]^y for single photons;
    it saturates to ``inf`` on float overflow.
    """
    if y_star < 1 or delta < 1 or n_max < 1:
        raise ParameterError(
            f"hilbert_dim_bound needs y*, delta, n_max >= 1, got {y_star}, {delta}, {n_max}"
        )
    y = math.ceil(y_star)
    photons = n_max * y
    exact = math.comb(delta * y + photons - 1, photons)
    try:
        relaxation = (math.e * (delta + n_max) / n_max) ** photons
    except OverflowError:
        relaxation = math.inf
    return HilbertBound(exact, relaxation)
