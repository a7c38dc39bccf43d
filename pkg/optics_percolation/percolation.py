#!/usr/bin/env python3

"""
Vertex percolation on input/output lightcone graphs.

Input vertices are kept independently with probability eta; the kept ones
are grouped into connected components (two inputs are connected when they
share an output mode). Component size is the number of input vertices.

Also holds the tail bound on the largest component, the size cap y* derived
from it, and the Monte-Carlo sweep over (eta, N, trial) cells.
"""

import math
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats
from sklearn.linear_model import LinearRegression
from tqdm import tqdm

from .circuit_graph import GENERATORS, BipartiteGraph
from .errors import ParameterError, SupercriticalError
from .utils import as_generator, njit, stream_rng

logger = logging.getLogger(__name__)

# Largest permanent computed to date; exported as a plotting reference only.
LARGEST_PERMANENT_MARKER = 56

RECORD_COLUMNS = [
    "arch",
    "N",
    "M",
    "delta",
    "eta",
    "trial",
    "seed",
    "max_component",
    "num_components",
]
AGGREGATION = "mean"


@njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def _label_components(n_a, n_b, edge_a, edge_b, kept):
    # Output vertices never enter the forest: the first kept input seen on an
    # output becomes its anchor and later inputs are merged into it.
    parent = np.arange(n_a)
    size = np.ones(n_a, dtype=np.int64)
    anchor = np.full(n_b, -1, dtype=np.int64)
    for e in range(edge_a.shape[0]):
        a = edge_a[e]
        if not kept[a]:
            continue
        b = edge_b[e]
        if anchor[b] < 0:
            anchor[b] = a
            continue
        ra = _find(parent, a)
        rb = _find(parent, anchor[b])
        if ra == rb:
            continue
        if size[ra] < size[rb]:
            ra, rb = rb, ra
        parent[rb] = ra
        size[ra] += size[rb]

    labels = np.full(n_a, -1, dtype=np.int64)
    for a in range(n_a):
        if kept[a]:
            labels[a] = _find(parent, a)
    return labels


@dataclass(frozen=True)
class Component:
    """One connected piece of the percolated graph."""

    a_ids: Tuple[int, ...]
    b_ids: Tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.a_ids)


class ComponentSet:
    """Components of the kept input vertices of a graph.

    ``labels[k]`` is the root index of A-vertex ``k`` or -1 when the vertex
    was removed. Components are ordered by their smallest A index.
    """

    def __init__(self, graph: BipartiteGraph, labels: np.ndarray):
        self.graph = graph
        self.labels = labels
        kept_mask = labels >= 0
        self.kept = graph.a_vertices[kept_mask]
        self.removed = graph.a_vertices[~kept_mask]
        roots, first, counts = np.unique(
            labels[kept_mask], return_index=True, return_counts=True
        )
        order = np.argsort(first, kind="stable")
        self._roots = roots[order]
        self.sizes = counts[order]

    @property
    def num_components(self) -> int:
        return int(self.sizes.size)

    @property
    def max_size(self) -> int:
        return int(self.sizes.max()) if self.sizes.size else 0

    def __len__(self) -> int:
        return self.num_components

    def __iter__(self) -> Iterator[Component]:
        return iter(self.components)

    @cached_property
    def components(self) -> List[Component]:
        position = {int(root): k for k, root in enumerate(self._roots)}
        a_members: List[List[int]] = [[] for _ in self._roots]
        for k, label in enumerate(self.labels):
            if label >= 0:
                a_members[position[int(label)]].append(int(self.graph.a_vertices[k]))

        edge_labels = self.labels[self.graph.edge_a]
        live = edge_labels >= 0
        b_members: List[set] = [set() for _ in self._roots]
        for label, b_idx in zip(edge_labels[live], self.graph.edge_b[live]):
            b_members[position[int(label)]].add(int(self.graph.b_vertices[b_idx]))

        return [
            Component(tuple(a), tuple(sorted(b))) for a, b in zip(a_members, b_members)
        ]

    def component_of(self, a_id: int) -> Optional[Component]:
        for component in self.components:
            if a_id in component.a_ids:
                return component
        return None


def _check_probability(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ParameterError(f"{name} must lie in [0, 1], got {value}")
    return value


def remove_vertices(g: BipartiteGraph, eta: float, rng=None) -> Tuple[np.ndarray, np.ndarray]:
    """Keep every input vertex independently with probability eta.

    Returns:
        (kept ids, removed ids), both sorted.
    """
    eta = _check_probability("eta", eta)
    rng = as_generator(rng)
    mask = rng.random(g.num_inputs) < eta
    return g.a_vertices[mask], g.a_vertices[~mask]


def _kept_mask(g: BipartiteGraph, kept) -> np.ndarray:
    kept = np.asarray(kept)
    if kept.dtype == bool:
        if kept.shape != (g.num_inputs,):
            raise ParameterError(
                f"Kept mask has shape {kept.shape}, expected ({g.num_inputs},)"
            )
        return kept
    kept = kept.astype(np.int64).reshape(-1)
    mask = np.isin(g.a_vertices, kept)
    if int(mask.sum()) != np.unique(kept).size:
        unknown = sorted(set(kept.tolist()) - set(g.a_vertices.tolist()))
        raise ParameterError(f"Kept vertices {unknown} are not input vertices of the graph")
    return mask


def connected_components(g: BipartiteGraph, kept) -> ComponentSet:
    """Group the kept input vertices (ids or a boolean mask over A) into components."""
    mask = _kept_mask(g, kept)
    labels = _label_components(
        g.num_inputs, g.num_outputs, g.edge_a, g.edge_b, np.ascontiguousarray(mask)
    )
    return ComponentSet(g, labels)


def percolate(g: BipartiteGraph, eta: float, rng=None) -> ComponentSet:
    kept, _ = remove_vertices(g, eta, rng)
    return connected_components(g, kept)


def _decay_rate(eta: float, delta: int) -> float:
    eta = _check_probability("eta", eta)
    if delta < 1:
        raise ParameterError(f"delta must be >= 1, got {delta}")
    load = eta * delta ** 2
    if load >= 1.0:
        raise SupercriticalError(
            f"eta * delta^2 = {load:.6g} >= 1: supercritical, no component bound exists"
        )
    if load == 0.0:
        return math.inf
    return 1.0 - load - math.log(load)


def y_star(n: int, epsilon: float, eta: float, delta: int) -> float:
    """Component-size cap log(N/eps) / (1 - eta*D^2 - log(eta*D^2)).

    Args:
        n: number of input vertices N >= 1.
        epsilon: failure budget in (0, 1).
        eta: vertex survival probability.
        delta: maximum degree of the graph.

    Returns:
        The cap; 0 when eta is 0.
    """
    if n < 1:
        raise ParameterError(f"N must be >= 1, got {n}")
    if not 0.0 < epsilon < 1.0:
        raise ParameterError(f"epsilon must lie in (0, 1), got {epsilon}")
    rate = _decay_rate(eta, delta)
    if math.isinf(rate):
        return 0.0
    return math.log(n / epsilon) / rate


def tail_bound(n: int, y: float, eta: float, delta: int, clamp: bool = True) -> float:
    """Upper bound N * exp(-y * rate) on Pr(largest component > y)."""
    rate = _decay_rate(eta, delta)
    if y <= 0:
        value = float(n)
    elif math.isinf(rate):
        value = 0.0
    else:
        value = n * math.exp(-y * rate)
    return min(value, 1.0) if clamp else value


def binomial_tail_bound(n: int, y: float, eta: float, delta: int) -> float:
    """Union bound N * Pr(Bin(ceil(y) * D^2, eta) > y) over exploration queries, before any Chernoff step."""
    _decay_rate(eta, delta)
    if y <= 0:
        return min(float(n), 1.0)
    trials = math.ceil(y) * delta ** 2
    return min(1.0, n * float(stats.binom.sf(math.floor(y), trials, eta)))


def _run_cell(cell: tuple) -> Tuple[int, int]:
    arch, n, delta, eta, seed, eta_idx, n_idx, trial, spacing = cell
    rng = stream_rng(seed, eta_idx, n_idx, trial)
    if arch == "1d":
        graph = GENERATORS[arch](n, delta, rng, spacing=spacing)
    else:
        graph = GENERATORS[arch](n, delta, rng)
    components = percolate(graph, eta, rng)
    return components.max_size, components.num_components


def _check_experiment_args(arch: str, delta: int, etas, ns, trials: int) -> None:
    if arch not in GENERATORS:
        raise ParameterError(f"Unknown architecture '{arch}', expected one of {sorted(GENERATORS)}")
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    if delta < 1:
        raise ParameterError(f"delta must be >= 1, got {delta}")
    if not len(etas) or not len(ns):
        raise ParameterError("Need at least one eta and one N value")
    for eta in etas:
        _check_probability("eta", eta)
    for n in ns:
        if n < 1:
            raise ParameterError(f"N must be >= 1, got {n}")
        if delta > 8 * n:
            raise ParameterError(f"delta={delta} exceeds the number of output modes M={8 * n}")


def percolation_experiment(
    arch: str,
    delta: int,
    etas: Sequence[float],
    ns: Sequence[int],
    trials: int,
    seed: int = 0,
    workers: int = 1,
    spacing: int = 1,
    progress: bool = False,
) -> pd.DataFrame:
    """Largest-component statistics over a grid of (eta, N) and repeated trials.

    Every cell draws a fresh graph and removal pattern from the stream
    ``(seed, eta index, N index, trial)``, so rows do not depend on the
    number of workers.

    Returns:
        DataFrame with ``RECORD_COLUMNS``, ordered by (eta, N, trial).
    """
    _check_experiment_args(arch, delta, etas, ns, trials)
    cells = [
        (arch, int(n), int(delta), float(eta), int(seed), i, j, t, int(spacing))
        for i, eta in enumerate(etas)
        for j, n in enumerate(ns)
        for t in range(trials)
    ]
    logger.info(
        f"Percolation sweep: arch={arch}, delta={delta}, {len(etas)} eta x {len(ns)} N "
        f"x {trials} trials = {len(cells)} cells, workers={workers}"
    )

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(
                tqdm(
                    pool.map(_run_cell, cells, chunksize=max(1, len(cells) // (8 * workers))),
                    total=len(cells),
                    disable=not progress,
                    desc=f"percolate[{arch}]",
                )
            )
    else:
        results = [
            _run_cell(cell)
            for cell in tqdm(cells, disable=not progress, desc=f"percolate[{arch}]")
        ]

    rows = [
        {
            "arch": arch,
            "N": n,
            "M": 8 * n,
            "delta": d,
            "eta": eta,
            "trial": t,
            "seed": s,
            "max_component": max_size,
            "num_components": count,
        }
        for (_, n, d, eta, s, _, _, t, _), (max_size, count) in zip(cells, results)
    ]
    return pd.DataFrame(rows, columns=RECORD_COLUMNS)


def summarize_experiment(records: pd.DataFrame) -> pd.DataFrame:
    """Mean, median and max of the largest component per (arch, N, delta, eta)."""
    summary = (
        records.groupby(["arch", "N", "M", "delta", "eta"], sort=True)["max_component"]
        .agg(["mean", "median", "max", "count"])
        .rename(
            columns={
                "mean": "mean_max_component",
                "median": "median_max_component",
                "max": "max_max_component",
                "count": "trials",
            }
        )
        .reset_index()
    )
    summary["marker"] = LARGEST_PERMANENT_MARKER
    return summary


@dataclass(frozen=True)
class GrowthFit:
    log_coef: float
    linear_coef: float
    log_residual: float
    linear_residual: float

    @property
    def residual_ratio(self) -> float:
        """Linear-fit residual over log-fit residual; large means logarithmic growth."""
        if self.log_residual <= 0.0:
            return math.inf if self.linear_residual > 0.0 else 1.0
        return self.linear_residual / self.log_residual

    def is_logarithmic(self, min_ratio: float = 10.0) -> bool:
        return self.residual_ratio >= min_ratio


def fit_growth(ns: Sequence[int], values: Sequence[float], fit_intercept: bool = False) -> GrowthFit:
    """Least-squares fits of values against a*log(N) and against b*N."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.size < 2 or ns.shape != values.shape:
        raise ParameterError("Growth fit needs at least two (N, value) pairs of equal length")

    def _fit(feature: np.ndarray) -> Tuple[float, float]:
        model = LinearRegression(fit_intercept=fit_intercept)
        model.fit(feature.reshape(-1, 1), values)
        residual = float(np.sum((model.predict(feature.reshape(-1, 1)) - values) ** 2))
        return float(model.coef_[0]), residual

    log_coef, log_residual = _fit(np.log(ns))
    linear_coef, linear_residual = _fit(ns)
    return GrowthFit(log_coef, linear_coef, log_residual, linear_residual)


def tail_validation(
    arch: str,
    n: int,
    delta: int,
    eta: float,
    trials: int,
    seed: int = 0,
    epsilon: float = 0.01,
    y_values: Optional[Iterable[int]] = None,
    workers: int = 1,
    spacing: int = 1,
    progress: bool = False,
) -> pd.DataFrame:
    """Empirical Pr(largest component > y) next to both analytic bounds.

    Without ``y_values`` every integer in [1, ceil(3 * y*)] is checked.
    """
    cap = y_star(n, epsilon, eta, delta)
    if y_values is None:
        y_values = range(1, max(1, math.ceil(3 * cap)) + 1)
    records = percolation_experiment(
        arch, delta, [eta], [n], trials, seed=seed, workers=workers,
        spacing=spacing, progress=progress,
    )
    largest = records["max_component"].to_numpy()

    rows: List[Dict] = []
    for y in y_values:
        p = float(np.mean(largest > y))
        stderr = math.sqrt(p * (1.0 - p) / trials)
        bound = tail_bound(n, y, eta, delta)
        binomial = binomial_tail_bound(n, y, eta, delta)
        rows.append(
            {
                "y": int(y),
                "empirical": p,
                "stderr": stderr,
                "bound": bound,
                "binomial_bound": binomial,
                "within_bound": p <= bound + 3 * stderr,
                "within_binomial_bound": p <= binomial + 3 * stderr,
            }
        )
    return pd.DataFrame(rows)
