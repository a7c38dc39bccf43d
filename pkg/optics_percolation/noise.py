#!/usr/bin/env python3

"""
Classical descriptions of photon loss and partial distinguishability.

Uniform loss commutes with beam splitters, so all loss is applied at the
input: a photon (or a Fock mode with n photons) survives with transmission
eta and lost inputs simply drop out of the lightcone graph. Partially
distinguishable photons are split into an interfering set and a set of
classical particles.
"""

import enum
import logging
from dataclasses import asdict, dataclass
from typing import Iterator, Mapping, Optional

import numpy as np

from .circuit_graph import InputSpec
from .errors import ParameterError, UnsupportedNoiseError
from .utils import as_generator

logger = logging.getLogger(__name__)


class NoiseKind(str, enum.Enum):
    LOSS = "loss"
    DISTINGUISHABILITY = "distinguishability"
    BOTH = "both"


def _check_probability(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ParameterError(f"{name} must lie in [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class NoiseSpec:
    """Noise parameters: transmission, per-layer transmission, overlap and model kind."""

    eta: float = 1.0
    eta_per_layer: Optional[float] = None
    x: float = 1.0
    kind: NoiseKind = NoiseKind.LOSS

    def __post_init__(self):
        object.__setattr__(self, "eta", _check_probability("eta", self.eta))
        object.__setattr__(self, "x", _check_probability("x", self.x))
        if self.eta_per_layer is not None:
            object.__setattr__(
                self, "eta_per_layer", _check_probability("eta_per_layer", self.eta_per_layer)
            )
        try:
            object.__setattr__(self, "kind", NoiseKind(self.kind))
        except ValueError:
            raise ParameterError(
                f"Unknown noise kind '{self.kind}', expected one of {[k.value for k in NoiseKind]}"
            )

    def effective_eta(self, depth: Optional[int] = None) -> float:
        """Total transmission; a per-layer value is folded over the circuit depth."""
        if self.eta_per_layer is None:
            return self.eta
        if depth is None:
            raise ParameterError("eta_per_layer needs the circuit depth to fold into eta")
        return fold_per_layer_loss(self.eta_per_layer, depth)

    def percolation_parameter(self, depth: Optional[int] = None, fock_n: Optional[int] = None) -> float:
        """Probability that an input vertex stays in the interfering graph."""
        if self.kind is NoiseKind.BOTH:
            raise UnsupportedNoiseError(
                "Combined loss and distinguishability has no analysed threshold"
            )
        if self.kind is NoiseKind.DISTINGUISHABILITY:
            return self.x
        eta = self.effective_eta(depth)
        if fock_n is None or fock_n == 1:
            return eta
        if fock_n < 1:
            raise ParameterError(f"Fock occupation must be >= 1, got {fock_n}")
        return 1.0 - (1.0 - eta) ** fock_n

    @classmethod
    def from_dict(cls, data: Mapping) -> "NoiseSpec":
        """Build from the ``eta``/``eta_per_layer``/``x``/``kind`` mapping.

        When ``kind`` is missing it is inferred from which parameters are noisy.
        """
        try:
            eta = float(data.get("eta") if data.get("eta") is not None else 1.0)
            eta_per_layer = data.get("eta_per_layer")
            eta_per_layer = None if eta_per_layer is None else float(eta_per_layer)
            x = float(data.get("x") if data.get("x") is not None else 1.0)
        except (TypeError, ValueError) as e:
            raise ParameterError(f"Noise parameters must be numbers: {e}")
        kind = data.get("kind")
        if kind is None:
            lossy = eta < 1.0 or eta_per_layer is not None
            if x < 1.0 and lossy:
                kind = NoiseKind.BOTH
            elif x < 1.0:
                kind = NoiseKind.DISTINGUISHABILITY
            else:
                kind = NoiseKind.LOSS
        return cls(
            eta=eta,
            eta_per_layer=eta_per_layer,
            x=x,
            kind=kind,
        )

    def to_dict(self) -> dict:
        data = asdict(self)
        data["kind"] = self.kind.value
        return data


def sample_loss_single(input_spec: InputSpec, eta: float, rng=None) -> np.ndarray:
    """Survival mask over ``input_spec.modes`` for single-photon inputs."""
    if not input_spec.is_single_photon:
        raise ParameterError("sample_loss_single needs every occupied mode to hold exactly one photon")
    eta = _check_probability("eta", eta)
    rng = as_generator(rng)
    return rng.random(input_spec.num_inputs) < eta


def sample_loss_fock(n: int, eta: float, rng=None, size=None):
    """Surviving photon count k ~ Binomial(n, eta); the vertex is removed when k == 0."""
    if n < 0:
        raise ParameterError(f"Photon number must be >= 0, got {n}")
    eta = _check_probability("eta", eta)
    rng = as_generator(rng)
    return rng.binomial(n, eta, size=size)


def sample_loss_counts(input_spec: InputSpec, eta: float, rng=None) -> np.ndarray:
    """Surviving count per occupied mode, aligned with ``input_spec.modes``."""
    eta = _check_probability("eta", eta)
    rng = as_generator(rng)
    return rng.binomial(input_spec.counts, eta)


def fold_per_layer_loss(eta1: float, depth: int) -> float:
    eta1 = _check_probability("eta_per_layer", eta1)
    if depth < 0:
        raise ParameterError(f"Depth must be >= 0, got {depth}")
    return eta1 ** depth


def sample_distinguishability(n_photons: int, x: float, rng=None) -> np.ndarray:
    """Mask of photons that stay indistinguishable, each with probability x."""
    if n_photons < 0:
        raise ParameterError(f"Photon number must be >= 0, got {n_photons}")
    x = _check_probability("x", x)
    rng = as_generator(rng)
    return rng.random(n_photons) < x


@dataclass(frozen=True)
class ThresholdReport:
    condition: str
    parameter: float
    delta: int
    load: float
    margin: float
    simulable: bool

    def __iter__(self) -> Iterator:
        # unpacks as (simulable, margin)
        yield self.simulable
        yield self.margin

    def to_dict(self) -> dict:
        return asdict(self)


def _report(condition: str, parameter: float, delta: int, scale: float) -> ThresholdReport:
    load = parameter * scale
    margin = 1.0 - load
    return ThresholdReport(condition, parameter, delta, load, margin, margin > 0.0)


def classical_threshold(
    delta: int,
    noise: NoiseSpec,
    fock_n: Optional[int] = None,
    depth: Optional[int] = None,
) -> ThresholdReport:
    """Percolation condition parameter * delta^2 < 1 for the configured noise model.

    The parameter is eta (single-photon loss), 1 - (1 - eta)^n (Fock loss)
    or x (distinguishability). A per-layer transmission without a depth
    falls back to the per-layer condition.
    """
    if delta < 1:
        raise ParameterError(f"delta must be >= 1, got {delta}")
    if noise.kind is NoiseKind.BOTH:
        raise UnsupportedNoiseError(
            "Combined loss and distinguishability has no analysed threshold"
        )
    if noise.kind is NoiseKind.LOSS and noise.eta_per_layer is not None and depth is None:
        return per_layer_threshold(noise.eta_per_layer)

    parameter = noise.percolation_parameter(depth=depth, fock_n=fock_n)
    if noise.kind is NoiseKind.DISTINGUISHABILITY:
        condition = "distinguishability"
    elif fock_n is not None and fock_n > 1:
        condition = "fock_loss"
    else:
        condition = "loss"
    report = _report(condition, parameter, delta, delta ** 2)
    logger.debug(f"Threshold {condition}: load={report.load:.6g}, margin={report.margin:.6g}")
    return report


def per_layer_threshold(eta1: float) -> ThresholdReport:
    """Depth-independent sufficient condition eta1 < 1/4, from delta <= 2^depth."""
    eta1 = _check_probability("eta_per_layer", eta1)
    return _report("per_layer", eta1, 2, 4.0)


def general_input_threshold(p: float, delta: int) -> ThresholdReport:
    """Inputs (1-p)|0><0| + p*sigma percolate away when p * delta^2 < 1."""
    p = _check_probability("p", p)
    if delta < 1:
        raise ParameterError(f"delta must be >= 1, got {delta}")
    return _report("general_input", p, delta, delta ** 2)
