#!/usr/bin/env python3

"""
End-to-end acceptance checks run by ``cli verify``.

Each check returns a :class:`CheckResult`; a failed check never raises, so
one run reports every failing property. ``inject_fault`` swaps in a broken
permanent to confirm the checks can fail.
"""

import math
import logging
from contextlib import nullcontext
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional
from unittest import mock

import numpy as np

from . import sampler
from .circuit_graph import InputSpec, bs_unitary, random_circuit
from .errors import ParameterError
from .mps import dense_evolve, evolve_circuit, fidelity, schmidt_rank_check
from .noise import NoiseKind, NoiseSpec, classical_threshold
from .percolation import percolation_experiment, tail_validation, y_star
from .utils import stream_rng

logger = logging.getLogger(__name__)

FAULTS = ("permanent-sign",)

VERIFY_DEFAULTS = {
    "permanent_matrices": 200,
    "tail_trials": 10000,
    "sampler_samples": 100000,
    "sampler_tolerance": 0.015,
    "mps_random_circuits": 50,
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.passed)

    def to_dict(self) -> dict:
        return asdict(self)


def _determinant(matrix):
    matrix = np.asarray(matrix)
    if matrix.shape[0] == 0:
        return 1.0 + 0j
    return complex(np.linalg.det(matrix.astype(np.complex128)))


def check_hom_dip(settings: dict, seed: int) -> CheckResult:
    u = bs_unitary(np.pi / 4, 0.0)
    p11 = sampler.outcome_probability(u, (1, 1), (1, 1))
    p20 = sampler.outcome_probability(u, (1, 1), (2, 0))
    p02 = sampler.outcome_probability(u, (1, 1), (0, 2))
    passed = p11 <= 1e-12 and abs(p20 - 0.5) <= 1e-12 and abs(p02 - 0.5) <= 1e-12
    return CheckResult("hom_dip", passed, {"p11": p11, "p20": p20, "p02": p02})


def check_permanent_oracle(settings: dict, seed: int) -> CheckResult:
    rng = stream_rng(seed, 1)
    worst = 0.0
    for k in range(settings["permanent_matrices"]):
        n = 2 + k % 6
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        worst = max(worst, abs(sampler.permanent(a) - sampler.permanent_naive(a)))
    factorials = all(
        sampler.permanent(np.ones((n, n), dtype=np.int64)) == math.factorial(n)
        for n in range(1, 8)
    )
    return CheckResult(
        "permanent_oracle",
        worst <= 1e-9 and factorials,
        {"max_difference": worst, "all_ones_factorial": factorials},
    )


def check_tail_bound(settings: dict, seed: int) -> CheckResult:
    n, delta, eta, epsilon = 1000, 9, 0.005, 0.01
    cap = y_star(n, epsilon, eta, delta)
    table = tail_validation(
        "nonlocal", n, delta, eta, settings["tail_trials"], seed=seed,
        epsilon=epsilon, y_values=range(1, 25),
    )
    failing = table.loc[~table["within_bound"], "y"].tolist()
    return CheckResult(
        "tail_bound",
        abs(cap - 7.681) <= 1e-3 and not failing,
        {"y_star": cap, "trials": settings["tail_trials"], "failing_y": failing},
    )


def _small_instance(seed: int, index: int):
    circuit = random_circuit(6, 2, stream_rng(seed, index))
    return circuit, InputSpec.single_photons([0, 2, 4])


def check_sampler_soundness(settings: dict, seed: int) -> CheckResult:
    details = {}
    passed = True
    for label, noise in (
        ("loss", NoiseSpec(eta=0.5, kind=NoiseKind.LOSS)),
        ("distinguishability", NoiseSpec(x=0.5, kind=NoiseKind.DISTINGUISHABILITY)),
    ):
        circuit, inputs = _small_instance(seed, 2)
        runner = sampler.PercolationSampler(
            circuit, inputs, noise, epsilon=0.01, y_star=inputs.num_inputs
        )
        records = runner.sample(settings["sampler_samples"], seed=seed)
        empirical = sampler.empirical_distribution([r.outcome for r in records])
        distance = sampler.tvd(empirical, sampler.brute_force_oracle(circuit, inputs, noise))
        ok = distance <= settings["sampler_tolerance"] and runner.total_restarts == 0
        details[label] = {"tvd": distance, "restarts": runner.total_restarts}
        passed = passed and ok
    return CheckResult("sampler_soundness", passed, details)


def check_tvd_budget(settings: dict, seed: int) -> CheckResult:
    circuit = random_circuit(8, 2, stream_rng(seed, 3))
    inputs = InputSpec.single_photons([0, 2, 4, 6])
    noise = NoiseSpec(eta=0.5, kind=NoiseKind.LOSS)
    exact = sampler.brute_force_oracle(circuit, inputs, noise)
    conditioned, p_fail = sampler.conditioned_oracle(circuit, inputs, noise, y_cap=2)
    distance = sampler.tvd(exact, conditioned)
    return CheckResult(
        "tvd_budget",
        distance <= 2 * p_fail + 1e-12,
        {"tvd": distance, "p_fail": p_fail, "budget": 2 * p_fail},
    )


def check_mps_equivalence(settings: dict, seed: int) -> CheckResult:
    inputs = InputSpec.single_photons([0, 2, 4])
    circuit = random_circuit(6, 3, stream_rng(seed, 4))
    state = evolve_circuit(circuit, inputs)
    f = fidelity(state, dense_evolve(circuit, inputs))
    ranks = []
    for k in range(settings["mps_random_circuits"]):
        psi = dense_evolve(random_circuit(6, 3, stream_rng(seed, 5, k)), inputs)
        ranks.append(max(schmidt_rank_check(psi, cut, 3) for cut in range(1, 6)))
    passed = f >= 1 - 1e-8 and state.max_bond_seen <= 8 and max(ranks) <= 8
    return CheckResult(
        "mps_equivalence",
        passed,
        {"fidelity": f, "max_bond": state.max_bond_seen, "max_rank": max(ranks)},
    )


def check_fock_threshold(settings: dict, seed: int) -> CheckResult:
    mismatches = []
    for n in (1, 2, 3):
        for eta in np.round(np.linspace(0.01, 0.5, 50), 2):
            for delta in (2, 3, 4):
                report = classical_threshold(delta, NoiseSpec(eta=float(eta)), fock_n=n)
                direct = 1.0 - (1.0 - (1.0 - eta) ** n) * delta ** 2
                single_photon_rule = eta * delta ** 2 < 1 if n == 1 else report.simulable
                if report.simulable != (direct > 0) or report.simulable != single_photon_rule:
                    mismatches.append((n, float(eta), delta))
    return CheckResult("fock_threshold", not mismatches, {"mismatches": mismatches})


def check_determinism(settings: dict, seed: int) -> CheckResult:
    first = percolation_experiment("nonlocal", 9, [0.05], [200], 3, seed=seed)
    second = percolation_experiment("nonlocal", 9, [0.05], [200], 3, seed=seed)
    circuit, inputs = _small_instance(seed, 6)
    noise = NoiseSpec(eta=0.5)
    draws = [
        sampler.PercolationSampler(circuit, inputs, noise, y_star=3).sample(50, seed=seed)
        for _ in range(2)
    ]
    passed = first.equals(second) and draws[0] == draws[1]
    return CheckResult("determinism", passed, {})


CHECKS: List[Callable[[dict, int], CheckResult]] = [
    check_hom_dip,
    check_permanent_oracle,
    check_tail_bound,
    check_sampler_soundness,
    check_tvd_budget,
    check_mps_equivalence,
    check_fock_threshold,
    check_determinism,
]


def run_verification(
    settings: Optional[dict] = None, seed: int = 0, inject_fault: Optional[str] = None
) -> List[CheckResult]:
    """Run every check and return one result per check."""
    settings = {**VERIFY_DEFAULTS, **(settings or {})}
    if inject_fault is not None and inject_fault not in FAULTS:
        raise ParameterError(f"Unknown fault '{inject_fault}', expected one of {FAULTS}")
    patch = (
        mock.patch.object(sampler, "permanent", _determinant)
        if inject_fault == "permanent-sign"
        else nullcontext()
    )

    results = []
    with patch:
        for check in CHECKS:
            try:
                result = check(settings, seed)
            except Exception as e:
                logger.error(f"Check {check.__name__} raised: {e}", exc_info=True)
                result = CheckResult(check.__name__[len("check_"):], False, {"error": str(e)})
            logger.info(f"{result.name}: {'PASS' if result.passed else 'FAIL'} {result.details}")
            results.append(result)
    return results
