"""Randomised property checks behind ``plapfraud selftest``.

Each check evaluates one identity on a random graph and returns a
``CheckResult``; ``run_selftest`` aggregates them over many graphs.  The
reference values come from dense-matrix evaluations and finite differences,
independent of the CSR code paths being checked.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .graph import SparseGraph, build_graph, divergence, gradient, inner_product_E, inner_product_V
from .graph import EdgeFunction
from .operators import DEFAULT_EPSILON, energy, laplacian, p_laplacian
from .solver import SolverConfig, coefficients, solve_fixed_point, solve_p2_direct


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    limit: float


def random_graph(rng: np.random.Generator, n: int | None = None,
                 density: float | None = None, n_max: int = 50) -> SparseGraph:
    """Erdos-Renyi graph with weights drawn from (0, 1]."""
    if n is None:
        n = int(rng.integers(5, n_max + 1))
    if density is None:
        density = float(rng.uniform(0.1, 0.4))
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < density
    w = 1.0 - rng.random(int(keep.sum()))
    return build_graph(n, np.column_stack([iu[keep], ju[keep], w]))


def with_asymmetric_weights(g: SparseGraph, rng: np.random.Generator) -> SparseGraph:
    """Copy of ``g`` whose two orientations of each edge carry different weights.

    Bypasses construction checks; only useful to show the checks can fail.
    """
    w = np.array(g.weights)
    upper = g.rows < g.indices
    w[upper] = w[upper] * rng.uniform(1.5, 3.0, int(upper.sum()))
    w.setflags(write=False)
    return replace(g, weights=w)


def dense_p_laplacian(W: np.ndarray, f: np.ndarray, p: float, epsilon: float) -> np.ndarray:
    diff = f[None, :] - f[:, None]          # diff[i, j] = f_j - f_i
    v = np.sqrt(np.sum(W * diff ** 2, axis=1) + epsilon)
    pw = v ** (p - 2.0)
    # (L_p f)_j = 1/2 sum_i W_ij (pw_i + pw_j) (f_j - f_i)
    return 0.5 * np.sum(W * (pw[:, None] + pw[None, :]) * diff, axis=0)


def finite_difference_gradient(fun: Callable[[np.ndarray], float], f: np.ndarray) -> np.ndarray:
    """Central differences with step 1e-6 (1 + |f_i|)."""
    grad = np.empty_like(f)
    x = f.copy()
    for i in range(f.size):
        h = 1e-6 * (1.0 + abs(f[i]))
        x[i] = f[i] + h
        up = fun(x)
        x[i] = f[i] - h
        down = fun(x)
        x[i] = f[i]
        grad[i] = (up - down) / (2.0 * h)
    return grad


def _rel(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    scale = max(1.0, float(np.max(np.abs(b), initial=0.0)))
    return float(np.max(np.abs(a - b), initial=0.0)) / scale


def check_adjointness(g, rng) -> CheckResult:
    f = rng.standard_normal(g.n)
    F = EdgeFunction(g, rng.standard_normal(g.n_slots))
    lhs = inner_product_E(gradient(g, f), F)
    rhs = inner_product_V(f, -divergence(g, F))
    return CheckResult("adjointness", abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs)),
                       abs(lhs - rhs) / (1 + abs(lhs)), 1e-10)


def check_psd(g, rng) -> CheckResult:
    f = rng.standard_normal(g.n)
    q = inner_product_V(laplacian(g, f), f)
    slack = 1e-12 * (1 + float(np.sum(g.degrees)) * float(np.dot(f, f)))
    return CheckResult("laplacian-psd", q >= -slack, max(0.0, -q), slack)


def check_self_adjoint(g, rng) -> CheckResult:
    f, h = rng.standard_normal(g.n), rng.standard_normal(g.n)
    a = inner_product_V(laplacian(g, f), h)
    b = inner_product_V(f, laplacian(g, h))
    err = abs(a - b) / (1 + abs(a))
    return CheckResult("laplacian-self-adjoint", err <= 1e-10, err, 1e-10)


def check_dense_oracle(g, rng) -> CheckResult:
    f = rng.standard_normal(g.n)
    W = g.to_dense()
    worst = 0.0
    for p in (1.0, 1.5, 2.0):
        worst = max(worst, float(np.max(np.abs(
            p_laplacian(g, f, p) - dense_p_laplacian(W, f, p, DEFAULT_EPSILON)), initial=0.0)))
    return CheckResult("p-laplacian-dense-oracle", worst <= 1e-12, worst, 1e-12)


def check_energy_gradient(g, rng) -> CheckResult:
    """Finite-difference gradient of S_p against 2 L_p f."""
    f = rng.standard_normal(g.n)
    worst = 0.0
    for p in (1.1, 1.5, 1.9, 2.0):
        fd = finite_difference_gradient(lambda x: energy(g, x, p), f)
        worst = max(worst, _rel(fd, 2.0 * p_laplacian(g, f, p)))
    return CheckResult("energy-gradient", worst <= 1e-4, worst, 1e-4)


def check_p2_oracle(g, rng) -> CheckResult:
    y = rng.choice([-1.0, 0.0, 1.0], size=g.n)
    rep = solve_fixed_point(g, y, SolverConfig(p=2.0, tol=1e-12, max_iter=100_000))
    err = float(np.max(np.abs(rep.f - solve_p2_direct(g, y, 1.0)), initial=0.0))
    return CheckResult("p2-direct-equivalence", rep.converged and err <= 1e-8, err, 1e-8)


def check_row_stochastic(g, rng) -> CheckResult:
    f = rng.uniform(-1, 1, g.n)
    worst = 0.0
    for p in (1.0, 1.3, 1.7, 2.0):
        c = coefficients(g, f, SolverConfig(p=p))
        rows = g.row_sum(c.p_offdiag) + c.p_diag
        worst = max(worst, float(np.max(np.abs(rows - 1.0), initial=0.0)))
    return CheckResult("row-stochastic", worst <= 1e-12, worst, 1e-12)


def _guarded(name, check, g, rng) -> CheckResult:
    try:
        return check(g, rng)
    except (ArithmeticError, ValueError, RuntimeError):
        return CheckResult(name, False, float("inf"), float("nan"))


CHECKS = {
    "adjointness": check_adjointness,
    "laplacian-psd": check_psd,
    "laplacian-self-adjoint": check_self_adjoint,
    "p-laplacian-dense-oracle": check_dense_oracle,
    "energy-gradient": check_energy_gradient,
    "p2-direct-equivalence": check_p2_oracle,
    "row-stochastic": check_row_stochastic,
}


def run_selftest(seed: int = 0, n_graphs: int = 20, inject_asymmetry: bool = False,
                 n_max: int = 30) -> list[CheckResult]:
    """Run every check on ``n_graphs`` random graphs, worst case per check."""
    rng = np.random.default_rng(seed)
    graphs = []
    for _ in range(n_graphs):
        g = random_graph(rng, n_max=n_max)
        if inject_asymmetry:
            g = with_asymmetric_weights(g, rng)
        graphs.append(g)
    results = []
    for name, check in CHECKS.items():
        runs = [_guarded(name, check, g, rng) for g in graphs]
        limits = [r.limit for r in runs if not np.isnan(r.limit)]
        results.append(CheckResult(name, all(r.passed for r in runs), max(r.worst for r in runs),
                                   min(limits, default=float("nan"))))
    return results
