import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plapfraud.checks import random_graph
from plapfraud.graph import (EdgeFunction, GraphError, build_graph, divergence, from_scipy,
                             gradient, inner_product_E, inner_product_V)

seeds = st.integers(0, 2**32 - 1)


class TestBuildGraph:
    def test_path_degrees(self, path3):
        np.testing.assert_array_equal(path3.degrees, [1, 2, 1])

    def test_empty_edge_set(self):
        g = build_graph(2, [])
        np.testing.assert_array_equal(g.degrees, [0, 0])
        assert g.n_edges == 0

    def test_single_half_weight_edge(self):
        g = build_graph(2, [(0, 1, 0.5)])
        np.testing.assert_array_equal(g.degrees, [0.5, 0.5])

    def test_symmetric_lookup_and_absent_pairs(self):
        g = build_graph(4, [(2, 0, 0.25), (1, 3, 2.0)])
        assert g.weight(0, 2) == g.weight(2, 0) == 0.25
        assert g.weight(3, 1) == 2.0
        assert g.weight(0, 1) == 0.0

    def test_pair_listed_twice_is_stored_once(self):
        g = build_graph(3, [(0, 1, 0.3), (1, 0, 0.3), (1, 2, 1.0)])
        assert g.n_edges == 2
        np.testing.assert_array_equal(g.degrees, [0.3, 1.3, 1.0])

    def test_neighbour_lists_sorted(self):
        g = build_graph(5, [(4, 0, 1), (0, 2, 1), (0, 1, 1), (3, 0, 1)])
        np.testing.assert_array_equal(g.neighbors(0), [1, 2, 3, 4])

    def test_arrays_are_read_only(self, path3):
        with pytest.raises(ValueError):
            path3.weights[0] = 5.0

    @pytest.mark.parametrize("edges, match", [
        ([(0, 3, 1.0)], "outside"),
        ([(-1, 0, 1.0)], "outside"),
        ([(0, 1, -0.1)], "negative"),
        ([(1, 1, 1.0)], "self-loop"),
        ([(0, 1, 1.0), (1, 0, 2.0)], "conflicting"),
        ([(0, 1, float("nan"))], "finite"),
    ])
    def test_rejects_bad_input(self, edges, match):
        with pytest.raises(GraphError, match=match):
            build_graph(3, edges)

    def test_from_scipy_round_trip(self, rng):
        g = random_graph(rng, n=12)
        h = from_scipy(g.to_scipy())
        np.testing.assert_array_equal(h.weights, g.weights)
        np.testing.assert_array_equal(h.indices, g.indices)

    def test_from_scipy_rejects_asymmetric(self):
        with pytest.raises(GraphError, match="symmetric"):
            from_scipy(np.array([[0, 1.0], [2.0, 0]]))

    @settings(max_examples=40, deadline=None)
    @given(seeds)
    def test_degree_consistency(self, seed):
        g = random_graph(np.random.default_rng(seed))
        rebuilt = [sum(w for i, j, w in g.edge_list() if v in (i, j)) for v in range(g.n)]
        np.testing.assert_allclose(g.degrees, rebuilt, rtol=1e-15, atol=0)
        W = g.to_dense()
        np.testing.assert_array_equal(W, W.T)
        assert np.all(np.diag(W) == 0)


class TestInnerProducts:
    def test_vertex_examples(self):
        assert inner_product_V([1, 2], [3, 4]) == 11
        assert inner_product_V([1, 0, -1], [1, 0, -1]) == 2
        assert inner_product_V([3.5, -2, 7], np.zeros(3)) == 0

    def test_vertex_length_mismatch(self):
        with pytest.raises(GraphError):
            inner_product_V([1, 2], [1, 2, 3])

    def test_edge_examples(self):
        g = build_graph(2, [(0, 1, 1.0)])
        ones = EdgeFunction(g, np.ones(2))
        assert inner_product_E(ones, ones) == 2
        F = EdgeFunction.from_dict(g, {(0, 1): 2.0, (1, 0): -1.0})
        assert inner_product_E(F, F) == 5
        assert inner_product_E(F, EdgeFunction.zeros(g)) == 0

    def test_edge_graph_mismatch(self):
        g = build_graph(2, [(0, 1, 1.0)])
        h = build_graph(2, [(0, 1, 1.0)])
        with pytest.raises(GraphError, match="different graph"):
            inner_product_E(EdgeFunction.zeros(g), EdgeFunction.zeros(h))

    def test_edge_function_shape_checked(self, path3):
        with pytest.raises(GraphError):
            EdgeFunction(path3, np.zeros(3))


class TestGradientDivergence:
    def test_gradient_on_path(self, path3):
        df = gradient(path3, [0, 1, 3])
        assert df[0, 1] == 1 and df[1, 2] == 2
        assert df[1, 0] == -1 and df[2, 1] == -2

    def test_gradient_scales_with_root_weight(self):
        g = build_graph(2, [(0, 1, 4.0)])
        assert gradient(g, [0, 1])[0, 1] == 2

    def test_gradient_of_constant_is_zero(self, rng):
        g = random_graph(rng)
        assert np.all(gradient(g, np.full(g.n, 3.7)).values == 0)

    def test_gradient_length_mismatch(self, path3):
        with pytest.raises(GraphError):
            gradient(path3, [1, 2])

    def test_divergence_on_path(self, path3):
        F = EdgeFunction.from_dict(path3, {(0, 1): 1.0})
        np.testing.assert_array_equal(divergence(path3, F), [1, -1, 0])

    def test_divergence_of_zero(self, path3):
        np.testing.assert_array_equal(divergence(path3, EdgeFunction.zeros(path3)), 0)

    def test_divergence_graph_mismatch(self, path3):
        other = build_graph(3, [(0, 1, 1.0), (1, 2, 1.0)])
        with pytest.raises(GraphError):
            divergence(path3, EdgeFunction.zeros(other))

    def test_adjointness_ten_vertices(self, rng):
        g = random_graph(rng, n=10, density=0.4)
        f = rng.standard_normal(10)
        F = EdgeFunction(g, rng.standard_normal(g.n_slots))
        lhs = inner_product_E(gradient(g, f), F)
        rhs = inner_product_V(f, -divergence(g, F))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(seeds)
    def test_adjointness_property(self, seed):
        rng = np.random.default_rng(seed)
        g = random_graph(rng)
        f = rng.standard_normal(g.n)
        F = EdgeFunction(g, rng.standard_normal(g.n_slots))
        lhs = inner_product_E(gradient(g, f), F)
        rhs = inner_product_V(f, -divergence(g, F))
        assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))

    @settings(max_examples=40, deadline=None)
    @given(seeds)
    def test_gradient_antisymmetry(self, seed):
        rng = np.random.default_rng(seed)
        g = random_graph(rng)
        df = gradient(g, rng.standard_normal(g.n)).values
        np.testing.assert_array_equal(df + df[g.reverse], 0)
