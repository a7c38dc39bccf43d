import os

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from optics_percolation.circuit_graph import (
    BeamSplitter,
    BipartiteGraph,
    Circuit,
    InputSpec,
    binary_tree_circuit,
    brickwork_1d_circuit,
    bs_unitary,
    build_unitary,
    gen_1d,
    gen_nonlocal,
    lightcone_bipartite,
    max_degree,
    max_interference_degree,
    random_circuit,
    unitarity_residual,
)
from optics_percolation.errors import ParameterError, StructureError


class TestBeamSplitter:
    def test_identity(self):
        assert_allclose(bs_unitary(0.0, 0.0), np.eye(2), atol=1e-15)

    def test_quarter_turn_is_signed_swap(self):
        assert_allclose(bs_unitary(np.pi / 2, 0.0), [[0, -1], [1, 0]], atol=1e-12)

    def test_balanced_splitter(self):
        h = 1 / np.sqrt(2)
        b = bs_unitary(np.pi / 4, 0.0)
        assert_allclose(b, [[h, -h], [h, h]], atol=1e-12)
        assert unitarity_residual(b) <= 1e-12

    def test_angles_taken_mod_two_pi(self):
        assert_allclose(bs_unitary(0.3 + 2 * np.pi, 1.1 - 4 * np.pi), bs_unitary(0.3, 1.1), atol=1e-12)

    def test_random_angles_unitary(self, rng):
        for theta, phi in rng.uniform(-10, 10, size=(50, 2)):
            assert unitarity_residual(bs_unitary(theta, phi)) <= 1e-12


class TestCircuit:
    def test_depth_is_layer_count(self, small_circuit):
        assert small_circuit.depth == 2
        assert small_circuit.num_modes == 6

    def test_mode_reuse_in_layer_rejected(self):
        with pytest.raises(StructureError, match="more than one"):
            Circuit.from_layers(3, [[(0, 1, 0.1), (1, 2, 0.2)]])

    def test_mode_out_of_range_rejected(self):
        with pytest.raises(StructureError):
            Circuit.from_layers(2, [[(0, 2, 0.1)]])

    def test_same_mode_twice_rejected(self):
        with pytest.raises(StructureError):
            Circuit(2, ((BeamSplitter(0, 1, 1, 0.1),),))

    def test_malformed_json_dict(self):
        with pytest.raises(StructureError):
            Circuit.from_dict({"layers": []})

    def test_json_file(self, config_dir):
        circuit = Circuit.from_json(os.path.join(config_dir, "circuits", "hom.json"))
        assert circuit.num_modes == 2
        assert_allclose(build_unitary(circuit), bs_unitary(np.pi / 4, 0.0), atol=1e-12)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParameterError, match="not found"):
            Circuit.from_json(str(tmp_path / "missing.json"))

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(StructureError, match="not valid JSON"):
            Circuit.from_json(str(path))
        path.write_text('{"modes": 2, "layers": [[{"i": 0, "j": "one", "theta": 0.1}]]}')
        with pytest.raises(StructureError, match="broken.json"):
            Circuit.from_json(str(path))

    def test_to_dict_matches_file_format(self, hom_circuit):
        data = hom_circuit.to_dict()
        assert data["modes"] == 2
        assert data["layers"][0][0]["i"] == 0 and data["layers"][0][0]["j"] == 1
        assert Circuit.from_dict(data) == hom_circuit


class TestInputSpec:
    def test_single_photons(self, three_photons):
        assert three_photons.modes == (0, 2, 4)
        assert three_photons.num_inputs == 3
        assert three_photons.n_photons == 3
        assert three_photons.max_photon == 1
        assert three_photons.is_single_photon

    def test_fock_occupations(self):
        spec = InputSpec.from_dict({"occupations": {"3": 1, "0": 2}})
        assert spec.modes == (0, 3)
        assert spec.n_photons == 3
        assert spec.max_photon == 2
        assert not spec.is_single_photon
        assert_array_equal(spec.occupation_vector(4), [2, 0, 0, 1])

    def test_zero_occupation_rejected(self):
        with pytest.raises(ParameterError):
            InputSpec({0: 0})

    def test_needs_a_key(self):
        with pytest.raises(ParameterError):
            InputSpec.from_dict({"photons": [0]})

    @pytest.mark.parametrize(
        "data",
        [
            {"occupations": {"0": 1.5}},
            {"occupations": {"zero": 1}},
            {"occupations": [1, 2]},
            {"modes": ["a"]},
            {"modes": [True]},
        ],
    )
    def test_malformed_description(self, data):
        with pytest.raises(StructureError):
            InputSpec.from_dict(data)

    def test_integral_float_accepted(self):
        assert InputSpec.from_dict({"occupations": {"1": 2.0}}).occupations == {1: 2}

    def test_json_file_errors(self, tmp_path):
        path = tmp_path / "inputs.json"
        path.write_text("[0, 1]")
        with pytest.raises(StructureError, match="JSON object"):
            InputSpec.from_json(str(path))
        path.write_text('{"occupations": {"0": 0}}')
        with pytest.raises(ParameterError, match="inputs.json"):
            InputSpec.from_json(str(path))


class TestBuildUnitary:
    def test_empty_circuit(self):
        assert_allclose(build_unitary(Circuit(3)), np.eye(3))

    def test_single_gate(self, hom_circuit):
        assert_allclose(build_unitary(hom_circuit), bs_unitary(np.pi / 4, 0.0), atol=1e-12)

    def test_random_deep_circuit_is_unitary(self, rng):
        u = build_unitary(random_circuit(16, 10, rng))
        assert unitarity_residual(u) <= 1e-10

    def test_layer_order(self):
        first = (0, 1, 0.4, 0.2)
        second = (1, 2, 1.1, 0.7)
        u = build_unitary(Circuit.from_layers(3, [[first], [second]]))
        l1 = np.eye(3, dtype=complex)
        l1[np.ix_([0, 1], [0, 1])] = bs_unitary(0.4, 0.2)
        l2 = np.eye(3, dtype=complex)
        l2[np.ix_([1, 2], [1, 2])] = bs_unitary(1.1, 0.7)
        assert_allclose(u, l1 @ l2, atol=1e-12)


class TestLightcone:
    def test_empty_circuit(self):
        g = lightcone_bipartite(Circuit(6), InputSpec.single_photons([2, 5]))
        assert_array_equal(g.a_vertices, [2, 5])
        assert_array_equal(g.b_vertices, [2, 5])
        assert set(g.edges()) == {(2, 2), (5, 5)}
        assert g.delta == 1

    def test_small_circuit_neighbourhoods(self, small_circuit, three_photons):
        g = lightcone_bipartite(small_circuit, three_photons)
        assert g.neighbors(0) == (0, 1, 2)
        assert g.neighbors(2) == (1, 2, 3, 4)
        assert g.neighbors(4) == (3, 4, 5)
        assert g.delta == 4

    def test_input_out_of_range(self):
        with pytest.raises(ParameterError):
            lightcone_bipartite(Circuit(3), InputSpec.single_photons([3]))

    def test_non_edges_are_exact_zeros(self, rng):
        for _ in range(5):
            circuit = random_circuit(10, 2, rng)
            u = build_unitary(circuit)
            g = lightcone_bipartite(circuit, InputSpec.single_photons(range(10)))
            edges = set(g.edges())
            for v in range(10):
                for w in range(10):
                    if (v, w) not in edges:
                        assert u[v, w] == 0

    @pytest.mark.parametrize("depth", [1, 2, 3, 4])
    def test_degree_law(self, rng, depth):
        for _ in range(5):
            circuit = random_circuit(24, depth, rng)
            g = lightcone_bipartite(circuit, InputSpec.single_photons(range(24)))
            assert g.delta <= 2 ** depth

    @pytest.mark.parametrize("depth", [1, 2, 3])
    def test_binary_tree_saturates_degree_law(self, depth):
        circuit = binary_tree_circuit(depth)
        g = lightcone_bipartite(circuit, InputSpec.single_photons(range(2 ** depth)))
        assert g.delta == 2 ** depth

    @pytest.mark.parametrize("depth", [1, 2, 3])
    def test_local_1d_bound(self, depth):
        circuit = brickwork_1d_circuit(20, depth)
        g = lightcone_bipartite(circuit, InputSpec.single_photons(range(20)))
        assert g.delta <= 2 * depth + 1

    def test_interference_degree_bounded_by_delta_squared(self, rng):
        circuit = random_circuit(16, 2, rng)
        g = lightcone_bipartite(circuit, InputSpec.single_photons(range(0, 16, 2)))
        assert max_interference_degree(g) <= g.delta ** 2


class TestMaxDegree:
    def test_empty_graph(self):
        assert max_degree(BipartiteGraph.from_adjacency({})) == 0

    def test_counts_both_sides(self):
        g = BipartiteGraph.from_adjacency({0: [0, 1, 2, 3], 1: [3, 4]})
        assert max_degree(g) == 4
        g = BipartiteGraph.from_adjacency({0: [7], 1: [7], 2: [7]})
        assert max_degree(g) == 3

    def test_edge_list_file(self, tmp_path):
        g = BipartiteGraph.from_adjacency({0: [1, 2], 3: [2]}, num_modes=5)
        path = str(tmp_path / "graph.txt")
        g.to_edge_list(path)
        with open(path) as f:
            assert f.readline().split() == ["2", "5", "2"]
        loaded = BipartiteGraph.from_edge_list(path)
        assert loaded.adjacency == g.adjacency
        assert loaded.num_modes == 5


class TestGenerators:
    def test_nonlocal_single_input(self):
        g = gen_nonlocal(1, 3, np.random.default_rng(0))
        assert g.num_inputs == 1
        assert g.num_modes == 8
        assert len(set(g.neighbors(0))) == 3

    def test_nonlocal_large_exact_degree(self):
        g = gen_nonlocal(10 ** 4, 4, np.random.default_rng(7))
        assert g.num_modes == 8 * 10 ** 4
        assert_array_equal(g.a_degrees, np.full(10 ** 4, 4))
        pairs = set(zip(g.edge_a.tolist(), g.edge_b.tolist()))
        assert len(pairs) == g.num_edges

    def test_nonlocal_dense_regime(self):
        g = gen_nonlocal(1, 8, np.random.default_rng(3))
        assert g.neighbors(0) == tuple(range(8))

    def test_nonlocal_deterministic(self):
        a = gen_nonlocal(50, 9, np.random.default_rng(11))
        b = gen_nonlocal(50, 9, np.random.default_rng(11))
        assert_array_equal(a.edge_b, b.edge_b)

    def test_nonlocal_delta_too_large(self):
        with pytest.raises(ParameterError, match="exceeds"):
            gen_nonlocal(1, 9, np.random.default_rng(0))

    def test_1d_nearest_sites(self):
        g = gen_1d(3, 3, np.random.default_rng(0))
        assert g.num_modes == 24
        for a in range(3):
            window = g.neighbors(a)
            assert len(window) == 3
            assert window[1] - window[0] == 1 and window[2] - window[1] == 1
        assert g.neighbors(1)[0] == g.neighbors(0)[0] + 1

    def test_1d_intervals_and_degree(self):
        g = gen_1d(40, 9, spacing=8)
        assert_array_equal(g.a_degrees, np.full(40, 9))
        for a in range(40):
            window = g.neighbors(a)
            assert window[-1] - window[0] == 8

    def test_1d_boundary_windows_stay_inside(self):
        g = gen_1d(2, 16, spacing=15)
        for a in range(2):
            window = g.neighbors(a)
            assert window[0] >= 0 and window[-1] < g.num_modes

    def test_1d_deterministic(self):
        a = gen_1d(20, 5, np.random.default_rng(1))
        b = gen_1d(20, 5, np.random.default_rng(2))
        assert a.adjacency == b.adjacency

    def test_1d_spacing_must_fit(self):
        with pytest.raises(ParameterError):
            gen_1d(3, 3, spacing=12)
