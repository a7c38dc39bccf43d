#!/usr/bin/env python3

"""
Linear-optical circuits and their input/output lightcone graphs.

A circuit is a list of beam-splitter layers over M modes. Each input photon
can only reach the output modes inside its lightcone, which defines the
bipartite graph G = (A, B, E) used by the percolation decomposition:
A holds the occupied input modes, B the reachable output modes and
(v, w) is an edge iff output w lies in the lightcone of input v.

The synthetic generators at the bottom build graphs directly (no circuit),
the way the percolation sweeps need them.
"""

import os
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ParameterError, StructureError
from .utils import as_generator, load_json

logger = logging.getLogger(__name__)

UNITARITY_TOL = 1e-10


@dataclass(frozen=True)
class BeamSplitter:
    """Two-mode gate acting on modes (i, j) in a given layer."""

    layer: int
    i: int
    j: int
    theta: float
    phi: float = 0.0

    @property
    def modes(self) -> Tuple[int, int]:
        return (self.i, self.j)

    def matrix(self) -> np.ndarray:
        return bs_unitary(self.theta, self.phi)

    def to_dict(self) -> dict:
        return {"i": self.i, "j": self.j, "theta": self.theta, "phi": self.phi}


@dataclass(frozen=True)
class Circuit:
    """Layered beam-splitter description of an M-mode interferometer."""

    num_modes: int
    layers: Tuple[Tuple[BeamSplitter, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(tuple(layer) for layer in self.layers))
        self.validate()

    @property
    def depth(self) -> int:
        return len(self.layers)

    def validate(self) -> None:
        if self.num_modes < 1:
            raise StructureError(f"Circuit needs at least one mode, got {self.num_modes}")
        for index, layer in enumerate(self.layers):
            used = set()
            for bs in layer:
                if bs.layer != index:
                    raise StructureError(
                        f"Beam splitter on modes {bs.modes} is tagged layer {bs.layer} "
                        f"but sits in layer {index}"
                    )
                if bs.i == bs.j:
                    raise StructureError(f"Layer {index}: beam splitter acts twice on mode {bs.i}")
                for mode in bs.modes:
                    if not 0 <= mode < self.num_modes:
                        raise StructureError(
                            f"Layer {index}: mode {mode} outside [0, {self.num_modes})"
                        )
                    if mode in used:
                        raise StructureError(
                            f"Layer {index}: mode {mode} used by more than one beam splitter"
                        )
                    used.add(mode)

    def gates(self) -> Iterator[BeamSplitter]:
        for layer in self.layers:
            yield from layer

    @classmethod
    def from_layers(cls, num_modes: int, layers: Sequence[Sequence[tuple]]) -> "Circuit":
        """Build from nested ``(i, j, theta[, phi])`` tuples."""
        built = []
        for index, layer in enumerate(layers):
            built.append(tuple(BeamSplitter(index, *gate) for gate in layer))
        return cls(num_modes, tuple(built))

    @classmethod
    def from_dict(cls, data: Mapping) -> "Circuit":
        try:
            num_modes = int(data["modes"])
            layers = []
            for index, layer in enumerate(data.get("layers", [])):
                layers.append(
                    tuple(
                        BeamSplitter(
                            index,
                            int(gate["i"]),
                            int(gate["j"]),
                            float(gate["theta"]),
                            float(gate.get("phi", 0.0)),
                        )
                        for gate in layer
                    )
                )
        except (KeyError, TypeError, ValueError) as e:
            raise StructureError(f"Malformed circuit description: {e}")
        return cls(num_modes, tuple(layers))

    @classmethod
    def from_json(cls, path: str) -> "Circuit":
        data = load_json(path, "Circuit")
        try:
            return cls.from_dict(data)
        except StructureError as e:
            raise type(e)(f"{path}: {e}")

    def to_dict(self) -> dict:
        return {
            "modes": self.num_modes,
            "layers": [[bs.to_dict() for bs in layer] for layer in self.layers],
        }


def _as_int(value) -> int:
    # JSON object keys arrive as strings
    if isinstance(value, str):
        return int(value)
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return int(value)
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise ValueError(f"{value!r} is not an integer")


@dataclass(frozen=True)
class InputSpec:
    """Photon occupations of the input modes; absent modes are vacuum."""

    occupations: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        cleaned = {}
        for mode, count in self.occupations.items():
            try:
                mode, count = _as_int(mode), _as_int(count)
            except (TypeError, ValueError):
                raise StructureError(f"Occupation {mode!r}: {count!r} is not a pair of integers")
            if mode < 0:
                raise ParameterError(f"Input mode must be non-negative, got {mode}")
            if count < 1:
                raise ParameterError(f"Occupied input mode {mode} needs n >= 1, got {count}")
            cleaned[mode] = count
        object.__setattr__(self, "occupations", dict(sorted(cleaned.items())))

    @classmethod
    def single_photons(cls, modes: Iterable[int]) -> "InputSpec":
        return cls({m: 1 for m in modes})

    @property
    def modes(self) -> Tuple[int, ...]:
        return tuple(self.occupations)

    @property
    def counts(self) -> np.ndarray:
        return np.array(list(self.occupations.values()), dtype=np.int64)

    @property
    def num_inputs(self) -> int:
        return len(self.occupations)

    @property
    def n_photons(self) -> int:
        return int(sum(self.occupations.values()))

    @property
    def max_photon(self) -> int:
        return max(self.occupations.values(), default=0)

    @property
    def is_single_photon(self) -> bool:
        return all(n == 1 for n in self.occupations.values())

    def occupation_vector(self, num_modes: int) -> np.ndarray:
        vector = np.zeros(num_modes, dtype=np.int64)
        for mode, count in self.occupations.items():
            if mode >= num_modes:
                raise ParameterError(f"Input mode {mode} outside [0, {num_modes})")
            vector[mode] = count
        return vector

    @classmethod
    def from_dict(cls, data: Mapping) -> "InputSpec":
        """Accept ``{"modes": [...]}`` (single photons) or ``{"occupations": {mode: n}}``."""
        try:
            if "occupations" in data:
                return cls(dict(data["occupations"]))
            if "modes" in data:
                return cls.single_photons(data["modes"])
        except (TypeError, ValueError) as e:
            if isinstance(e, ParameterError):
                raise
            raise StructureError(f"Malformed input description: {e}")
        raise ParameterError("Input description needs an 'occupations' or a 'modes' key")

    @classmethod
    def from_json(cls, path: str) -> "InputSpec":
        data = load_json(path, "Input")
        try:
            return cls.from_dict(data)
        except ParameterError as e:
            raise type(e)(f"{path}: {e}")


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """Input vertices A, output vertices B and lightcone edges between them.

    Edges are stored as two parallel index arrays into ``a_vertices`` and
    ``b_vertices``; vertex ids are mode numbers for graphs extracted from a
    circuit and plain labels for the synthetic generators.
    """

    a_vertices: np.ndarray
    b_vertices: np.ndarray
    edge_a: np.ndarray
    edge_b: np.ndarray
    num_modes: int

    def __post_init__(self):
        for name in ("a_vertices", "b_vertices", "edge_a", "edge_b"):
            array = np.ascontiguousarray(getattr(self, name), dtype=np.int64)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        if self.edge_a.shape != self.edge_b.shape:
            raise StructureError("Edge index arrays must have the same length")
        if self.edge_a.size:
            if self.edge_a.min() < 0 or self.edge_a.max() >= self.a_vertices.size:
                raise StructureError("Edge endpoint outside the A vertex set")
            if self.edge_b.min() < 0 or self.edge_b.max() >= self.b_vertices.size:
                raise StructureError("Edge endpoint outside the B vertex set")

    @property
    def num_inputs(self) -> int:
        return int(self.a_vertices.size)

    @property
    def num_outputs(self) -> int:
        return int(self.b_vertices.size)

    @property
    def num_edges(self) -> int:
        return int(self.edge_a.size)

    @cached_property
    def a_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_a, minlength=self.num_inputs)

    @cached_property
    def b_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_b, minlength=self.num_outputs)

    @cached_property
    def delta(self) -> int:
        return max_degree(self)

    @cached_property
    def adjacency(self) -> Dict[int, Tuple[int, ...]]:
        """Map from A-vertex id to the sorted ids of its B-neighbours."""
        neighbours: Dict[int, List[int]] = {int(a): [] for a in self.a_vertices}
        for a_idx, b_idx in zip(self.edge_a, self.edge_b):
            neighbours[int(self.a_vertices[a_idx])].append(int(self.b_vertices[b_idx]))
        return {a: tuple(sorted(bs)) for a, bs in neighbours.items()}

    def neighbors(self, a_id: int) -> Tuple[int, ...]:
        return self.adjacency[a_id]

    def edges(self) -> Iterator[Tuple[int, int]]:
        for a_idx, b_idx in zip(self.edge_a, self.edge_b):
            yield int(self.a_vertices[a_idx]), int(self.b_vertices[b_idx])

    @classmethod
    def from_adjacency(
        cls, adjacency: Mapping[int, Iterable[int]], num_modes: Optional[int] = None
    ) -> "BipartiteGraph":
        a_ids = sorted(int(a) for a in adjacency)
        b_ids = sorted({int(b) for bs in adjacency.values() for b in bs})
        a_index = {a: k for k, a in enumerate(a_ids)}
        b_index = {b: k for k, b in enumerate(b_ids)}
        edge_a, edge_b = [], []
        for a in a_ids:
            for b in sorted({int(b) for b in adjacency[a]}):
                edge_a.append(a_index[a])
                edge_b.append(b_index[b])
        if num_modes is None:
            num_modes = max(b_ids, default=-1) + 1
        return cls(
            np.array(a_ids, dtype=np.int64),
            np.array(b_ids, dtype=np.int64),
            np.array(edge_a, dtype=np.int64),
            np.array(edge_b, dtype=np.int64),
            num_modes,
        )

    def to_edge_list(self, path: str) -> None:
        """Write ``N M DELTA`` followed by one ``a_id b_id`` pair per line."""
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w") as f:
            f.write(f"{self.num_inputs} {self.num_modes} {self.delta}\n")
            for a, b in self.edges():
                f.write(f"{a} {b}\n")

    @classmethod
    def from_edge_list(cls, path: str) -> "BipartiteGraph":
        with open(path, "r") as f:
            header = f.readline().split()
            if len(header) != 3:
                raise StructureError(f"Edge list {path} is missing its 'N M DELTA' header")
            num_modes = int(header[1])
            adjacency: Dict[int, List[int]] = {}
            for line in f:
                if not line.strip():
                    continue
                a, b = (int(token) for token in line.split())
                adjacency.setdefault(a, []).append(b)
        return cls.from_adjacency(adjacency, num_modes)


def bs_unitary(theta: float, phi: float) -> np.ndarray:
    """2x2 beam-splitter matrix [[cos t, -e^{i p} sin t], [e^{-i p} sin t, cos t]]."""
    theta = float(theta) % (2 * np.pi)
    phi = float(phi) % (2 * np.pi)
    c, s = np.cos(theta), np.sin(theta)
    return np.array(
        [[c, -np.exp(1j * phi) * s], [np.exp(-1j * phi) * s, c]], dtype=np.complex128
    )


def build_unitary(circuit: Circuit) -> np.ndarray:
    """M x M transfer matrix; entry (v, w) is the amplitude from input v to output w.

    Layers are applied in order as column updates on the running product,
    so modes that no gate path connects keep an exact zero.
    """
    circuit.validate()
    u = np.eye(circuit.num_modes, dtype=np.complex128)
    for gate in circuit.gates():
        b = gate.matrix()
        col_i = u[:, gate.i].copy()
        col_j = u[:, gate.j].copy()
        u[:, gate.i] = col_i * b[0, 0] + col_j * b[1, 0]
        u[:, gate.j] = col_i * b[0, 1] + col_j * b[1, 1]
    return u


def unitarity_residual(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def lightcone_bipartite(circuit: Circuit, input_spec: InputSpec) -> BipartiteGraph:
    """Structural lightcone graph of the occupied input modes through the circuit."""
    for mode in input_spec.modes:
        if not 0 <= mode < circuit.num_modes:
            raise ParameterError(f"Input mode {mode} outside [0, {circuit.num_modes})")

    sources: List[frozenset] = [frozenset() for _ in range(circuit.num_modes)]
    for mode in input_spec.modes:
        sources[mode] = frozenset((mode,))
    for gate in circuit.gates():
        merged = sources[gate.i] | sources[gate.j]
        sources[gate.i] = merged
        sources[gate.j] = merged

    a_ids = list(input_spec.modes)
    a_index = {a: k for k, a in enumerate(a_ids)}
    b_ids = [w for w in range(circuit.num_modes) if sources[w]]
    edge_a, edge_b = [], []
    for b_idx, w in enumerate(b_ids):
        for v in sorted(sources[w]):
            edge_a.append(a_index[v])
            edge_b.append(b_idx)

    order = np.lexsort((edge_b, edge_a))
    graph = BipartiteGraph(
        np.array(a_ids, dtype=np.int64),
        np.array(b_ids, dtype=np.int64),
        np.array(edge_a, dtype=np.int64)[order],
        np.array(edge_b, dtype=np.int64)[order],
        circuit.num_modes,
    )
    logger.debug(
        f"Lightcone graph: |A|={graph.num_inputs}, |B|={graph.num_outputs}, "
        f"|E|={graph.num_edges}, delta={graph.delta}"
    )
    return graph


def max_degree(g: BipartiteGraph) -> int:
    """Maximum number of edges at a single vertex, over both sides."""
    if g.num_edges == 0:
        return 0
    return int(max(g.a_degrees.max(), g.b_degrees.max()))


def interference_graph(g: BipartiteGraph) -> Dict[int, frozenset]:
    """Inputs are adjacent when they share an output mode, i.e. can interfere."""
    by_output: Dict[int, List[int]] = {}
    for a, b in g.edges():
        by_output.setdefault(b, []).append(a)
    neighbours: Dict[int, set] = {int(a): set() for a in g.a_vertices}
    for members in by_output.values():
        for a in members:
            neighbours[a].update(members)
    return {a: frozenset(others - {a}) for a, others in neighbours.items()}


def max_interference_degree(g: BipartiteGraph) -> int:
    return max((len(v) for v in interference_graph(g).values()), default=0)


def _check_generator_args(n_inputs: int, delta_out: int, num_modes: int) -> None:
    if n_inputs < 1:
        raise ParameterError(f"Generator needs n_inputs >= 1, got {n_inputs}")
    if delta_out < 1:
        raise ParameterError(f"Generator needs delta >= 1, got {delta_out}")
    if delta_out > num_modes:
        raise ParameterError(
            f"delta={delta_out} exceeds the number of output modes M={num_modes}"
        )


def gen_nonlocal(n_inputs: int, delta_out: int, rng=None) -> BipartiteGraph:
    """N inputs, M = 8N outputs, each input wired to delta distinct random outputs."""
    num_modes = 8 * n_inputs
    _check_generator_args(n_inputs, delta_out, num_modes)
    rng = as_generator(rng)

    if 2 * delta_out > num_modes:
        targets = np.stack(
            [rng.choice(num_modes, size=delta_out, replace=False) for _ in range(n_inputs)]
        )
    else:
        # rejection on rows with a repeated output
        targets = rng.integers(0, num_modes, size=(n_inputs, delta_out))
        while True:
            ordered = np.sort(targets, axis=1)
            bad = np.flatnonzero((np.diff(ordered, axis=1) == 0).any(axis=1))
            if bad.size == 0:
                break
            targets[bad] = rng.integers(0, num_modes, size=(bad.size, delta_out))
        targets = np.sort(targets, axis=1)

    return BipartiteGraph(
        np.arange(n_inputs, dtype=np.int64),
        np.arange(num_modes, dtype=np.int64),
        np.repeat(np.arange(n_inputs, dtype=np.int64), delta_out),
        targets.reshape(-1).astype(np.int64),
        num_modes,
    )


def gen_1d(n_inputs: int, delta_out: int, rng=None, spacing: int = 1) -> BipartiteGraph:
    """Inputs on a line of M = 8N output sites, each wired to its delta nearest sites.

    Inputs sit ``spacing`` sites apart in a block centred on the line. With an
    even delta the extra site goes to the lower-index side, and windows that
    would run past either end are shifted back inside the line.
    ``rng`` is accepted for signature parity with :func:`gen_nonlocal`; the
    construction is deterministic.
    """
    num_modes = 8 * n_inputs
    _check_generator_args(n_inputs, delta_out, num_modes)
    if spacing < 1 or spacing * (n_inputs - 1) >= num_modes:
        raise ParameterError(f"spacing={spacing} does not fit {n_inputs} inputs on {num_modes} sites")

    offset = (num_modes - 1 - spacing * (n_inputs - 1)) // 2
    positions = offset + spacing * np.arange(n_inputs, dtype=np.int64)
    starts = positions - delta_out // 2
    starts = np.clip(starts, 0, num_modes - delta_out)
    targets = starts[:, None] + np.arange(delta_out, dtype=np.int64)[None, :]

    return BipartiteGraph(
        np.arange(n_inputs, dtype=np.int64),
        np.arange(num_modes, dtype=np.int64),
        np.repeat(np.arange(n_inputs, dtype=np.int64), delta_out),
        targets.reshape(-1),
        num_modes,
    )


GENERATORS = {"nonlocal": gen_nonlocal, "1d": gen_1d}


def random_circuit(num_modes: int, depth: int, rng=None, local: bool = False) -> Circuit:
    """Random layered circuit; ``local`` restricts gates to nearest neighbours."""
    rng = as_generator(rng)
    layers = []
    for index in range(depth):
        if local:
            pairs = [(k, k + 1) for k in range(index % 2, num_modes - 1, 2)]
        else:
            order = rng.permutation(num_modes)
            pairs = [(int(order[k]), int(order[k + 1])) for k in range(0, num_modes - 1, 2)]
        gates = []
        for i, j in pairs:
            theta, phi = rng.uniform(0.0, 2 * np.pi, size=2)
            gates.append(BeamSplitter(index, i, j, float(theta), float(phi)))
        layers.append(tuple(gates))
    return Circuit(num_modes, tuple(layers))


def brickwork_1d_circuit(num_modes: int, depth: int, theta: float = np.pi / 4) -> Circuit:
    """Nearest-neighbour brickwork; alternating even/odd pairings."""
    layers = [
        [(k, k + 1, theta, 0.0) for k in range(index % 2, num_modes - 1, 2)]
        for index in range(depth)
    ]
    return Circuit.from_layers(num_modes, layers)


def binary_tree_circuit(depth: int, theta: float = np.pi / 4) -> Circuit:
    """Butterfly network on 2**depth modes; every input reaches every output."""
    num_modes = 2 ** depth
    layers = []
    for index in range(depth):
        stride = 2 ** index
        layers.append(
            [(k, k + stride, theta, 0.0) for k in range(num_modes) if not k & stride]
        )
    return Circuit.from_layers(num_modes, layers)
