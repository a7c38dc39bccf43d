import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from optics_percolation.circuit_graph import Circuit, InputSpec, bs_unitary, random_circuit
from optics_percolation.errors import BoundViolationError, ParameterError, ResourceError
from optics_percolation.mps import (
    GeneralInputState,
    apply_beamsplitter,
    bond_profile,
    dense_distribution,
    dense_evolve,
    evolve_circuit,
    fidelity,
    mps_from_input,
    mps_sample,
    schmidt_rank_bound,
    schmidt_rank_check,
    two_mode_gate,
)


class TestInputs:
    def test_fock_state(self):
        state = GeneralInputState.fock(2)
        assert state.n_max == 2
        assert_allclose(state.vector(4), [0, 0, 1, 0])

    def test_superposition(self):
        state = GeneralInputState((1 / math.sqrt(2), 1 / math.sqrt(2)))
        assert state.n_max == 1

    def test_not_normalized(self):
        with pytest.raises(ParameterError, match="normalized"):
            GeneralInputState((1.0, 1.0))

    def test_product_state(self):
        state = mps_from_input([1, 0, 1])
        assert state.local_dim == 3
        assert bond_profile(state) == [1, 1]
        dense = state.to_dense()
        assert dense[1, 0, 1] == 1.0
        assert np.sum(np.abs(dense) ** 2) == pytest.approx(1.0)

    def test_cutoff_too_small(self):
        with pytest.raises(ParameterError, match="cutoff"):
            mps_from_input([2, 0], local_dim=2)

    def test_input_spec_needs_modes(self):
        with pytest.raises(ParameterError):
            mps_from_input(InputSpec.single_photons([0]))


class TestTwoModeGate:
    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_isometry_on_allowed_inputs(self, d):
        b = bs_unitary(0.7, 1.3)
        g = two_mode_gate(b, d).reshape(d * d, d * d)
        allowed = [p * d + q for p in range(d) for q in range(d) if p + q < d]
        cols = g[:, allowed]
        assert_allclose(cols.conj().T @ cols, np.eye(len(allowed)), atol=1e-12)

    def test_single_photon_follows_matrix(self):
        b = bs_unitary(0.4, 0.9)
        g = two_mode_gate(b, 2)
        # |1,0> -> b00 |1,0> + b01 |0,1>
        assert g[1, 0, 1, 0] == pytest.approx(b[0, 0])
        assert g[0, 1, 1, 0] == pytest.approx(b[0, 1])


class TestEvolution:
    def test_hong_ou_mandel_state(self, hom_circuit):
        psi = evolve_circuit(hom_circuit, [1, 1]).to_dense()
        h = 1 / math.sqrt(2)
        assert psi[2, 0] == pytest.approx(h)
        assert psi[0, 2] == pytest.approx(-h)
        assert abs(psi[1, 1]) <= 1e-12

    def test_matches_dense(self, rng, three_photons):
        for _ in range(5):
            circuit = random_circuit(6, 3, rng)
            state = evolve_circuit(circuit, three_photons)
            assert fidelity(state, dense_evolve(circuit, three_photons)) >= 1 - 1e-8
            assert state.max_bond_seen <= 2 ** 3

    def test_non_adjacent_gate_both_orientations(self):
        for modes in ((0, 3), (3, 0)):
            circuit = Circuit.from_layers(4, [[(modes[0], modes[1], 0.6, 0.8)]])
            inputs = [1, 1, 0, 1]
            state = evolve_circuit(circuit, inputs)
            assert fidelity(state, dense_evolve(circuit, inputs)) >= 1 - 1e-10

    def test_fock_and_general_inputs(self, rng):
        inputs = [
            GeneralInputState.fock(2),
            GeneralInputState((0.6, 0.8)),
            GeneralInputState.vacuum(),
            GeneralInputState.fock(1),
        ]
        circuit = random_circuit(4, 3, rng)
        state = evolve_circuit(circuit, inputs)
        assert state.local_dim == 5
        assert fidelity(state, dense_evolve(circuit, inputs)) >= 1 - 1e-8

    def test_truncation_weight_and_renormalization(self):
        theta = 0.1
        circuit = Circuit.from_layers(2, [[(0, 1, theta, 0.0)]])
        state = evolve_circuit(circuit, [1, 0], trunc_threshold=0.2)
        assert state.discarded_weight == pytest.approx(math.sin(theta) ** 2)
        assert state.norm() == pytest.approx(1.0)
        exact = dense_evolve(circuit, [1, 0])
        assert fidelity(state, exact) == pytest.approx(math.cos(theta))

    def test_no_truncation_by_default(self, rng, three_photons):
        state = evolve_circuit(random_circuit(6, 2, rng), three_photons)
        assert state.discarded_weight <= 1e-20

    def test_bond_cap(self, hom_circuit):
        with pytest.raises(ResourceError, match="bond profile"):
            evolve_circuit(hom_circuit, [1, 1], max_bond=1)

    def test_invalid_modes(self):
        state = mps_from_input([1, 0])
        with pytest.raises(ParameterError):
            apply_beamsplitter(state, bs_unitary(0.3, 0.0), (0, 2))

    def test_report(self, hom_circuit):
        report = evolve_circuit(hom_circuit, [1, 1]).report()
        assert report["max_bond"] == 2
        assert report["bond_dims"] == [2]
        assert report["norm"] == pytest.approx(1.0)
        assert len(report["max_bond_per_gate"]) == 1

    def test_dense_size_cap(self):
        with pytest.raises(ResourceError):
            dense_evolve(Circuit(14), [1, 1, 1] + [0] * 11)


class TestSchmidtRank:
    def test_bound_values(self):
        assert schmidt_rank_bound(3) == 8
        assert schmidt_rank_bound(2, n_max=1, general=True) == 9
        assert schmidt_rank_bound(2, n_max=2) == 36

    def test_hom_rank(self, hom_circuit):
        psi = dense_evolve(hom_circuit, [1, 1])
        assert schmidt_rank_check(psi, 1, n_photons=2) == 2

    def test_violation_detected(self, hom_circuit):
        psi = dense_evolve(hom_circuit, [1, 1])
        with pytest.raises(BoundViolationError):
            schmidt_rank_check(psi, 1, n_photons=0)

    def test_random_circuits_respect_bound(self, rng, three_photons):
        for _ in range(20):
            state = evolve_circuit(random_circuit(6, 3, rng), three_photons)
            for cut in range(1, 6):
                assert schmidt_rank_check(state, cut, 3) <= 8

    def test_flat_vector_needs_local_dim(self, hom_circuit):
        psi = dense_evolve(hom_circuit, [1, 1]).reshape(-1)
        with pytest.raises(ParameterError):
            schmidt_rank_check(psi, 1, 2)
        assert schmidt_rank_check(psi, 1, 2, local_dim=3) == 2

    def test_invalid_cut(self, hom_circuit):
        psi = dense_evolve(hom_circuit, [1, 1])
        with pytest.raises(ParameterError):
            schmidt_rank_check(psi, 2, 2)


class TestSampling:
    def test_hom_samples(self, hom_circuit):
        state = evolve_circuit(hom_circuit, [1, 1])
        draws = mps_sample(state, np.random.default_rng(0), size=500)
        assert draws.shape == (500, 2)
        assert set(map(tuple, draws.tolist())) <= {(2, 0), (0, 2)}
        assert mps_sample(state, np.random.default_rng(1)).shape == (2,)

    def test_matches_dense_distribution(self, small_circuit, three_photons):
        state = evolve_circuit(small_circuit, three_photons)
        exact = dense_distribution(dense_evolve(small_circuit, three_photons), min_prob=1e-14)
        assert sum(exact.values()) == pytest.approx(1.0)
        draws = mps_sample(state, np.random.default_rng(5), size=20000)
        counts = {}
        for row in map(tuple, draws.tolist()):
            counts[row] = counts.get(row, 0) + 1
        outcomes = [m for m in exact if exact[m] * 20000 > 5]
        observed = np.array([counts.get(m, 0) for m in outcomes], dtype=float)
        expected = np.array([exact[m] for m in outcomes]) * 20000
        expected *= observed.sum() / expected.sum()
        assert stats.chisquare(observed, expected).pvalue > 1e-3
        assert all(sum(row) == 3 for row in draws.tolist())

    def test_sampling_leaves_state_untouched(self, hom_circuit):
        state = evolve_circuit(hom_circuit, [1, 1])
        before = state.to_dense().copy()
        mps_sample(state, 0, size=10)
        assert_allclose(state.to_dense(), before)
