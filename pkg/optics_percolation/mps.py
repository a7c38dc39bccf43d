#!/usr/bin/env python3

"""
Matrix-product-state evolution of linear-optical circuits on truncated Fock space.

Every mode is one site with local dimension ``local_dim`` (Fock levels
0..local_dim-1). Beam splitters are two-site gates; non-adjacent pairs are
routed with a swap network that is unwound after the gate. The state is kept
in mixed canonical form so the weight dropped by an SVD truncation is the
true squared error of that step.

A dense Fock-space evolution of the same circuit serves as the oracle.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .circuit_graph import Circuit, InputSpec
from .errors import BoundViolationError, ParameterError, ResourceError
from .utils import as_generator

logger = logging.getLogger(__name__)

# Singular values at or below this are numerical noise even with threshold 0.
SVD_FLOOR = 1e-12
RANK_TOL = 1e-10
NORM_TOL = 1e-12


@dataclass(frozen=True)
class GeneralInputState:
    """Single-mode input sum_n c_n |n>, n = 0..n_max."""

    amplitudes: Tuple[complex, ...]

    def __post_init__(self):
        amplitudes = tuple(complex(c) for c in self.amplitudes)
        if not amplitudes:
            raise ParameterError("Input state needs at least one amplitude")
        norm = sum(abs(c) ** 2 for c in amplitudes)
        if abs(norm - 1.0) > NORM_TOL:
            raise ParameterError(f"Input amplitudes must be normalized, sum |c_n|^2 = {norm:.15g}")
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def fock(cls, n: int) -> "GeneralInputState":
        return cls(tuple([0.0] * n + [1.0]))

    @classmethod
    def vacuum(cls) -> "GeneralInputState":
        return cls.fock(0)

    @property
    def n_max(self) -> int:
        return len(self.amplitudes) - 1

    def vector(self, local_dim: int) -> np.ndarray:
        out = np.zeros(local_dim, dtype=np.complex128)
        out[: len(self.amplitudes)] = self.amplitudes
        return out


InputLike = Union[Sequence[GeneralInputState], Sequence[int], InputSpec]


def _input_states(inputs: InputLike, num_modes: Optional[int] = None) -> List[GeneralInputState]:
    if isinstance(inputs, InputSpec):
        if num_modes is None:
            raise ParameterError("An InputSpec needs the number of modes")
        return [GeneralInputState.fock(int(n)) for n in inputs.occupation_vector(num_modes)]
    states = [s if isinstance(s, GeneralInputState) else GeneralInputState.fock(int(s)) for s in inputs]
    if num_modes is not None and len(states) != num_modes:
        raise ParameterError(f"Got {len(states)} input states for {num_modes} modes")
    return states


def default_local_dim(states: Sequence[GeneralInputState]) -> int:
    """Total photon number bound plus one; photon number is conserved so nothing is cut."""
    return sum(s.n_max for s in states) + 1


@dataclass
class MPSState:
    """Site tensors of shape (left bond, Fock level, right bond) plus bookkeeping."""

    tensors: List[np.ndarray]
    local_dim: int
    center: int = 0
    trunc_threshold: float = 0.0
    max_bond_cap: Optional[int] = None
    discarded_weight: float = 0.0
    max_bond_seen: int = 1
    history: List[int] = field(default_factory=list)

    @property
    def num_modes(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> List[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.tensors[self.center]))

    def copy(self) -> "MPSState":
        return MPSState(
            [t.copy() for t in self.tensors],
            self.local_dim,
            self.center,
            self.trunc_threshold,
            self.max_bond_cap,
            self.discarded_weight,
            self.max_bond_seen,
            list(self.history),
        )

    def to_dense(self) -> np.ndarray:
        psi = self.tensors[0]
        for tensor in self.tensors[1:]:
            psi = np.tensordot(psi, tensor, axes=(psi.ndim - 1, 0))
        return psi.reshape((self.local_dim,) * self.num_modes)

    def report(self) -> dict:
        return {
            "max_bond": self.max_bond_seen,
            "discarded_weight": self.discarded_weight,
            "bond_dims": self.bond_dims,
            "max_bond_per_gate": list(self.history),
            "norm": self.norm(),
            "local_dim": self.local_dim,
        }


def mps_from_input(
    inputs: InputLike,
    local_dim: Optional[int] = None,
    trunc_threshold: float = 0.0,
    max_bond: Optional[int] = None,
    num_modes: Optional[int] = None,
) -> MPSState:
    """Product-state MPS of per-mode inputs; every bond has dimension 1."""
    states = _input_states(inputs, num_modes)
    if not states:
        raise ParameterError("Need at least one mode")
    if local_dim is None:
        local_dim = default_local_dim(states)
    n_max = max(s.n_max for s in states)
    if local_dim <= n_max:
        raise ParameterError(f"Fock cutoff local_dim={local_dim} must exceed n_max={n_max}")
    tensors = [s.vector(local_dim).reshape(1, local_dim, 1) for s in states]
    return MPSState(tensors, local_dim, 0, trunc_threshold, max_bond)


def two_mode_gate(b: np.ndarray, local_dim: int) -> np.ndarray:
    """Fock-space action G[r, s, p, q] of the 2x2 mode transformation b.

    Input |p, q> maps to the expansion of (b00 x + b01 y)^p (b10 x + b11 y)^q
    over creation operators x, y. Inputs with p + q >= local_dim are left
    at zero; they never carry amplitude when the cutoff covers the total
    photon number.
    """
    d = local_dim
    fact = [math.factorial(k) for k in range(2 * d)]
    g = np.zeros((d, d, d, d), dtype=np.complex128)
    for p in range(d):
        first = [math.comb(p, a) * b[0, 0] ** a * b[0, 1] ** (p - a) for a in range(p + 1)]
        for q in range(d - p):
            second = [math.comb(q, c) * b[1, 0] ** c * b[1, 1] ** (q - c) for c in range(q + 1)]
            n = p + q
            scale = 1.0 / math.sqrt(fact[p] * fact[q])
            for a, fa in enumerate(first):
                for c, sc in enumerate(second):
                    r = a + c
                    g[r, n - r, p, q] += fa * sc * math.sqrt(fact[r] * fact[n - r]) * scale
    return g


def _swap_gate(local_dim: int) -> np.ndarray:
    eye = np.eye(local_dim)
    return np.einsum("rq,sp->rspq", eye, eye).astype(np.complex128)


def _move_center(state: MPSState, target: int) -> None:
    tensors = state.tensors
    while state.center < target:
        k = state.center
        dl, d, dr = tensors[k].shape
        q, r = np.linalg.qr(tensors[k].reshape(dl * d, dr))
        tensors[k] = q.reshape(dl, d, -1)
        tensors[k + 1] = np.tensordot(r, tensors[k + 1], axes=(1, 0))
        state.center += 1
    while state.center > target:
        k = state.center
        dl, d, dr = tensors[k].shape
        q, r = np.linalg.qr(tensors[k].reshape(dl, d * dr).T)
        tensors[k] = q.T.reshape(-1, d, dr)
        tensors[k - 1] = np.tensordot(tensors[k - 1], r.T, axes=(2, 0))
        state.center -= 1


def _apply_adjacent(state: MPSState, gate: np.ndarray, k: int, threshold: float) -> None:
    _move_center(state, k)
    left, right = state.tensors[k], state.tensors[k + 1]
    dl, d, _ = left.shape
    dr = right.shape[2]
    theta = np.tensordot(left, right, axes=(2, 0))
    theta = np.einsum("rspq,lpqx->lrsx", gate, theta)
    u, s, vh = np.linalg.svd(theta.reshape(dl * d, d * dr), full_matrices=False)

    total = float(np.sum(s ** 2))
    keep = s > max(threshold, SVD_FLOOR)
    if not keep.any():
        keep[0] = True
    discarded = float(np.sum(s[~keep] ** 2))
    if total > 0.0:
        state.discarded_weight += discarded / total
    u, s, vh = u[:, keep], s[keep], vh[keep, :]
    s = s * math.sqrt(total / float(np.sum(s ** 2)))

    chi = s.size
    if state.max_bond_cap is not None and chi > state.max_bond_cap:
        profile = state.bond_dims
        profile[k] = chi
        raise ResourceError(
            f"Bond dimension {chi} at cut {k + 1} exceeds the cap {state.max_bond_cap}; "
            f"bond profile {profile}"
        )
    state.tensors[k] = u.reshape(dl, d, chi)
    state.tensors[k + 1] = (s[:, None] * vh).reshape(chi, d, dr)
    state.center = k + 1
    state.max_bond_seen = max(state.max_bond_seen, chi)


def apply_beamsplitter(
    state: MPSState,
    gate: np.ndarray,
    modes: Tuple[int, int],
    trunc_threshold: Optional[float] = None,
) -> MPSState:
    """Apply the 2x2 mode transformation ``gate`` on ``modes`` in place.

    Non-adjacent modes are brought next to each other by swaps, which are
    undone afterwards so the site order always equals the mode order.
    """
    i, j = modes
    if i == j or not (0 <= i < state.num_modes and 0 <= j < state.num_modes):
        raise ParameterError(f"Invalid beam-splitter modes {modes} for {state.num_modes} modes")
    threshold = state.trunc_threshold if trunc_threshold is None else trunc_threshold
    gate = np.asarray(gate, dtype=np.complex128)
    if i > j:
        i, j = j, i
        gate = gate[::-1, ::-1]

    swap = _swap_gate(state.local_dim)
    for k in range(j - 1, i, -1):
        _apply_adjacent(state, swap, k, threshold)
    _apply_adjacent(state, two_mode_gate(gate, state.local_dim), i, threshold)
    for k in range(i + 1, j):
        _apply_adjacent(state, swap, k, threshold)
    state.history.append(state.max_bond)
    return state


def evolve_circuit(
    circuit: Circuit,
    inputs: InputLike,
    local_dim: Optional[int] = None,
    trunc_threshold: float = 0.0,
    max_bond: Optional[int] = None,
) -> MPSState:
    state = mps_from_input(inputs, local_dim, trunc_threshold, max_bond, num_modes=circuit.num_modes)
    for gate in circuit.gates():
        apply_beamsplitter(state, gate.matrix(), gate.modes)
    logger.debug(
        f"MPS evolution: {sum(len(layer) for layer in circuit.layers)} gates, "
        f"max bond {state.max_bond_seen}, discarded weight {state.discarded_weight:.3g}"
    )
    return state


def bond_profile(state: MPSState) -> List[int]:
    return state.bond_dims


def dense_evolve(
    circuit: Circuit, inputs: InputLike, local_dim: Optional[int] = None
) -> np.ndarray:
    """Full Fock-space state vector of shape (local_dim,) * M after the circuit."""
    states = _input_states(inputs, circuit.num_modes)
    if local_dim is None:
        local_dim = default_local_dim(states)
    if local_dim ** circuit.num_modes > 2 ** 26:
        raise ResourceError(
            f"Dense state of {local_dim}^{circuit.num_modes} amplitudes is too large"
        )
    psi = states[0].vector(local_dim)
    for s in states[1:]:
        psi = np.multiply.outer(psi, s.vector(local_dim))
    psi = psi.reshape((local_dim,) * circuit.num_modes)
    for gate in circuit.gates():
        g = two_mode_gate(gate.matrix(), local_dim)
        psi = np.tensordot(g, psi, axes=([2, 3], [gate.i, gate.j]))
        psi = np.moveaxis(psi, [0, 1], [gate.i, gate.j])
    return psi


def _dense(state) -> np.ndarray:
    return state.to_dense() if isinstance(state, MPSState) else np.asarray(state)


def fidelity(a, b) -> float:
    """Overlap |<a|b>| / (|a| |b|); blind to global phase."""
    a, b = _dense(a).reshape(-1), _dense(b).reshape(-1)
    return float(abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b)))


def schmidt_rank_bound(n_photons: int, n_max: int = 1, general: bool = False) -> int:
    if general or n_max > 1:
        return ((n_max + 1) * (n_max + 2) // 2) ** n_photons
    return 2 ** n_photons


def schmidt_rank_check(
    state,
    cut: int,
    n_photons: int,
    n_max: int = 1,
    general: bool = False,
    local_dim: Optional[int] = None,
) -> int:
    """Schmidt rank across modes [0, cut) | [cut, M), checked against its bound.

    Single photons give at most 2^N terms; general inputs with up to n_max
    photons per mode give at most [(n_max+1)(n_max+2)/2]^N, N being the
    number of occupied input modes.

    Raises:
        BoundViolationError: the rank exceeds the bound.
    """
    psi = _dense(state)
    if psi.ndim == 1:
        if local_dim is None:
            raise ParameterError("A flat state vector needs local_dim")
        num_modes = round(math.log(psi.size, local_dim))
        psi = psi.reshape((local_dim,) * num_modes)
    num_modes = psi.ndim
    if not 0 < cut < num_modes:
        raise ParameterError(f"Cut {cut} must lie strictly between 0 and {num_modes}")
    left = int(np.prod(psi.shape[:cut]))
    s = np.linalg.svd(psi.reshape(left, -1), compute_uv=False)
    rank = int(np.sum(s > RANK_TOL))
    bound = schmidt_rank_bound(n_photons, n_max, general)
    if rank > bound:
        raise BoundViolationError(f"Schmidt rank {rank} at cut {cut} exceeds the bound {bound}")
    return rank


def mps_sample(state: MPSState, rng=None, size: Optional[int] = None) -> np.ndarray:
    """Outcomes drawn site by site from exact conditional marginals.

    With the center moved to site 0 every later tensor is right-orthonormal,
    so the marginal of a prefix only needs the left environment.
    Returns one pattern, or an array of shape (size, M).
    """
    rng = as_generator(rng)
    work = state.copy()
    _move_center(work, 0)
    draws = 1 if size is None else int(size)
    norm = work.norm()
    env = np.ones((draws, 1), dtype=np.complex128)
    out = np.zeros((draws, work.num_modes), dtype=np.int64)
    for k, tensor in enumerate(work.tensors):
        v = np.einsum("nl,lpr->npr", env, tensor)
        if k == 0:
            v = v / norm
        probs = np.sum(np.abs(v) ** 2, axis=2)
        probs = probs / probs.sum(axis=1, keepdims=True)
        cumulative = np.cumsum(probs, axis=1)
        u = rng.random(draws)[:, None]
        picks = np.minimum(np.sum(cumulative < u, axis=1), work.local_dim - 1)
        out[:, k] = picks
        chosen = v[np.arange(draws), picks, :]
        env = chosen / np.linalg.norm(chosen, axis=1, keepdims=True)
    return out[0] if size is None else out


def dense_distribution(psi: np.ndarray, min_prob: float = 0.0) -> dict:
    """Outcome -> |<m|psi>|^2 over the Fock levels of a dense state."""
    probs = np.abs(psi) ** 2
    probs = probs / probs.sum()
    return {
        tuple(int(c) for c in index): float(p)
        for index, p in np.ndenumerate(probs)
        if p > min_prob
    }
