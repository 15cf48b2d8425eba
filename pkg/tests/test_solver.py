import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plapfraud.checks import random_graph
from plapfraud.graph import build_graph
from plapfraud.operators import laplacian
from plapfraud.solver import (SolverConfig, SolverError, coefficients, iterate, stationarity_residual,
                              solve_fixed_point, solve_p2_direct)

seeds = st.integers(0, 2**32 - 1)
P_SWEEP = [1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0]


def ternary(rng, n):
    return rng.choice([-1.0, 0.0, 1.0], size=n)


class TestConfig:
    @pytest.mark.parametrize("kwargs", [
        {"p": 0.5}, {"mu": 0.0}, {"epsilon": 0.0}, {"tol": -1.0}, {"max_iter": 0}, {"max_iter": 2.5},
    ])
    def test_rejects_out_of_bounds(self, kwargs):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)

    def test_defaults(self):
        cfg = SolverConfig()
        assert (cfg.mu, cfg.epsilon, cfg.tol, cfg.max_iter) == (1.0, 1e-10, 1e-9, 2000)


class TestCoefficients:
    def test_p2_gives_raw_weights(self, rng):
        g = random_graph(rng)
        c = coefficients(g, rng.standard_normal(g.n), SolverConfig(p=2.0))
        np.testing.assert_array_equal(c.m, g.weights)

    def test_path_middle_vertex(self, path3):
        c = coefficients(path3, [0.3, -0.2, 0.9], SolverConfig(p=2.0, mu=1.0))
        lo, hi = path3.indptr[1], path3.indptr[2]
        np.testing.assert_allclose(c.p_offdiag[lo:hi], [1 / 3, 1 / 3], rtol=1e-15)
        assert c.p_diag[1] == pytest.approx(1 / 3, rel=1e-15)

    def test_m_is_symmetric_and_nonnegative(self, rng):
        g = random_graph(rng)
        c = coefficients(g, rng.standard_normal(g.n), SolverConfig(p=1.4))
        np.testing.assert_array_equal(c.m, c.m[g.reverse])
        assert np.all(c.m >= 0) and np.all(c.p_offdiag >= 0) and np.all(c.p_diag > 0)

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.sampled_from(P_SWEEP))
    def test_rows_sum_to_one(self, seed, p):
        rng = np.random.default_rng(seed)
        g = random_graph(rng)
        c = coefficients(g, rng.uniform(-1, 1, g.n), SolverConfig(p=p))
        np.testing.assert_allclose(g.row_sum(c.p_offdiag) + c.p_diag, 1.0, rtol=0, atol=1e-12)


class TestFixedPoint:
    def test_path_converges_to_closed_form(self, path3):
        rep = solve_fixed_point(path3, [1.0, 0.0, -1.0], SolverConfig(p=2.0, tol=1e-13))
        assert rep.converged
        np.testing.assert_allclose(rep.f, [0.5, 0.0, -0.5], rtol=0, atol=1e-12)

    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
    def test_no_edges_returns_y(self, p):
        g = build_graph(4, [])
        y = np.array([1.0, -1.0, 0.0, 1.0])
        rep = solve_fixed_point(g, y, SolverConfig(p=p))
        assert rep.iterations == 1 and rep.converged
        np.testing.assert_array_equal(rep.f, y)

    def test_zero_labels_fixed_point(self, rng):
        g = random_graph(rng)
        rep = solve_fixed_point(g, np.zeros(g.n), SolverConfig(p=1.3))
        assert rep.iterations == 1
        np.testing.assert_array_equal(rep.f, 0.0)

    def test_not_converged_is_flagged(self, rng):
        g = random_graph(rng, n=30, density=0.3)
        rep = solve_fixed_point(g, ternary(rng, 30), SolverConfig(p=2.0, max_iter=3, tol=1e-15))
        assert not rep.converged and rep.iterations == 3
        assert rep.final_delta > 1e-15

    def test_non_finite_input(self, path3):
        with pytest.raises(SolverError):
            solve_fixed_point(path3, [np.nan, 0, 1], SolverConfig())

    def test_compiled_loop_matches_numpy_sweeps(self, rng):
        g = random_graph(rng, n=40, density=0.2)
        y = ternary(rng, 40)
        for p in (1.0, 1.5, 2.0):
            cfg = SolverConfig(p=p, tol=1e-300, max_iter=50)
            rep = solve_fixed_point(g, y, cfg)
            ref = next(itertools.islice(iterate(g, y, cfg), 49, None))
            np.testing.assert_allclose(rep.f, ref, rtol=0, atol=1e-13)

    @pytest.mark.parametrize("p", P_SWEEP)
    def test_iterates_stay_in_unit_box(self, rng, p):
        g = random_graph(rng, n=30)
        y = ternary(rng, 30)
        cfg = SolverConfig(p=p)
        for f in itertools.islice(iterate(g, y, cfg), 300):
            assert np.max(np.abs(f)) <= 1.0

    @settings(max_examples=20, deadline=None)
    @given(seeds, st.sampled_from([1.2, 1.5, 2.0]))
    def test_sign_symmetry(self, seed, p):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, n_max=30)
        y = ternary(rng, g.n)
        cfg = SolverConfig(p=p, max_iter=500)
        a, b = solve_fixed_point(g, y, cfg), solve_fixed_point(g, -y, cfg)
        np.testing.assert_array_equal(a.f, -b.f)
        assert a.iterations == b.iterations

    @pytest.mark.parametrize("p", [1.3, 1.5, 2.0])
    def test_converged_iterate_is_a_fixed_point(self, rng, p):
        tol = 1e-10
        g = random_graph(rng, n=30)
        y = ternary(rng, 30)
        cfg = SolverConfig(p=p, tol=tol, max_iter=100_000)
        rep = solve_fixed_point(g, y, cfg)
        assert rep.converged and rep.final_delta <= tol
        c = coefficients(g, rep.f, cfg)
        rhs = g.row_sum(c.p_offdiag * rep.f[g.indices]) + c.p_diag * y
        assert np.max(np.abs(rep.f - rhs)) <= 10 * tol


class TestDirect:
    @pytest.mark.parametrize("method", ["direct", "cg"])
    def test_path(self, path3, method):
        f = solve_p2_direct(path3, [1.0, 0.0, -1.0], 1.0, method=method)
        np.testing.assert_allclose(f, [0.5, 0.0, -0.5], rtol=0, atol=1e-12)

    def test_zero_rhs(self, rng):
        g = random_graph(rng)
        np.testing.assert_array_equal(solve_p2_direct(g, np.zeros(g.n)), 0.0)

    def test_rejects_nonpositive_mu(self, path3):
        with pytest.raises(ValueError):
            solve_p2_direct(path3, [1, 0, -1], 0.0)

    def test_methods_agree(self, rng):
        g = random_graph(rng, n=50)
        y = ternary(rng, 50)
        np.testing.assert_allclose(solve_p2_direct(g, y, method="cg"), solve_p2_direct(g, y),
                                   rtol=0, atol=1e-11)

    @settings(max_examples=25, deadline=None)
    @given(seeds)
    def test_fixed_point_agrees_with_direct(self, seed):
        rng = np.random.default_rng(seed)
        g = random_graph(rng)
        y = ternary(rng, g.n)
        rep = solve_fixed_point(g, y, SolverConfig(p=2.0, tol=1e-12, max_iter=100_000))
        assert rep.converged
        assert np.max(np.abs(rep.f - solve_p2_direct(g, y))) <= 1e-8


class TestResidual:
    def test_exact_p2_solution(self, rng):
        g = random_graph(rng)
        y = ternary(rng, g.n)
        f = solve_p2_direct(g, y)
        assert stationarity_residual(g, f, y, SolverConfig(p=2.0)) <= 1e-8
        np.testing.assert_allclose(laplacian(g, f) + (f - y), 0, atol=1e-10)

    def test_no_edges_at_y(self):
        g = build_graph(3, [])
        assert stationarity_residual(g, [1, 0, -1], [1, 0, -1], SolverConfig(p=1.5)) == 0.0

    def test_converged_p15(self, rng):
        tol = 1e-10
        for _ in range(5):
            g = random_graph(rng, n_max=30)
            y = ternary(rng, g.n)
            cfg = SolverConfig(p=1.5, tol=tol, max_iter=100_000)
            rep = solve_fixed_point(g, y, cfg)
            assert rep.converged
            assert rep.residual <= 100 * tol * cfg.mu
            assert rep.residual == stationarity_residual(g, rep.f, y, cfg)

    def test_dimension_mismatch(self, path3):
        with pytest.raises(ValueError):
            stationarity_residual(path3, [0, 0], [0, 0, 0], SolverConfig())
