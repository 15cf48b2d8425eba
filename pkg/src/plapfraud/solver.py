"""Fixed-point solver for p-Laplacian regularisation on a graph.

Minimises the smoothness-plus-fit functional by iterating the stationarity
condition ``L_p f + mu (f - y) = 0`` in Jacobi form::

    f_j <- (sum_i m_ij f_i + mu y_j) / (sum_i m_ij + mu)

with the edge coefficients ``m`` recomputed from the current iterate on every
sweep.  For p = 2 the system is linear and ``solve_p2_direct`` gives an
independent answer to compare against.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numba
import numpy as np
from scipy.sparse import diags, identity
from scipy.sparse.linalg import cg, spsolve

from .graph import SparseGraph
from .operators import DEFAULT_EPSILON, edge_coefficients, laplacian, p_laplacian

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Raised when the iteration produces non-finite values."""


@dataclass(frozen=True)
class SolverConfig:
    p: float = 2.0
    mu: float = 1.0
    epsilon: float = DEFAULT_EPSILON
    tol: float = 1e-9
    max_iter: int = 2000

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter}")


@dataclass(frozen=True)
class IterationCoefficients:
    """Jacobi weights for one sweep.

    ``m`` and ``p_offdiag`` are per directed slot (aligned with the graph's
    CSR arrays); ``p_diag`` is per vertex.  Row ``j`` of ``p_offdiag`` plus
    ``p_diag[j]`` sums to one.
    """

    m: np.ndarray
    p_offdiag: np.ndarray
    p_diag: np.ndarray


@dataclass(frozen=True)
class SolveReport:
    f: np.ndarray
    iterations: int
    final_delta: float
    residual: float
    converged: bool


def coefficients(g: SparseGraph, f, cfg: SolverConfig) -> IterationCoefficients:
    f = g.check_vertex_function(f)
    m = edge_coefficients(g, f, cfg.p, cfg.epsilon)
    denom = g.row_sum(m) + cfg.mu
    return IterationCoefficients(m=m, p_offdiag=m / denom[g.rows], p_diag=cfg.mu / denom)


def stationarity_residual(g: SparseGraph, f, y, cfg: SolverConfig) -> float:
    """Max-norm of ``L_p f + mu (f - y)``."""
    f = g.check_vertex_function(f)
    y = g.check_vertex_function(y, "y")
    r = p_laplacian(g, f, cfg.p, cfg.epsilon) + cfg.mu * (f - y)
    return float(np.max(np.abs(r))) if r.size else 0.0


def _sweep(g: SparseGraph, f: np.ndarray, y: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    m = edge_coefficients(g, f, cfg.p, cfg.epsilon)
    # numerator/denominator form keeps |f| <= max(|f|, |y|) exactly in floating point
    num = g.row_sum(m * f[g.indices]) + cfg.mu * y
    den = g.row_sum(m) + cfg.mu
    return num / den


def iterate(g: SparseGraph, y, cfg: SolverConfig):
    """Yield successive Jacobi iterates ``f^(1), f^(2), ...`` (unbounded).

    Plain NumPy sweeps, meant for inspection; ``solve_fixed_point`` runs the
    same update in compiled form.
    """
    y = g.check_vertex_function(y, "y").copy()
    f = y.copy()
    while True:
        f = _sweep(g, f, y, cfg)
        yield f


@numba.njit(cache=True)
def _jacobi_kernel(indptr, indices, weights, y, p, mu, eps, tol, max_iter):
    n = y.size
    f = y.copy()
    f_new = np.empty(n)
    powers = np.empty(n)
    expo = p - 2.0
    delta = np.inf
    t = 0
    while t < max_iter:
        for i in range(n):
            acc = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                d = f[i] - f[indices[k]]
                acc += weights[k] * (d * d)
            powers[i] = np.exp(expo * np.log(np.sqrt(acc + eps)))
        delta = 0.0
        for j in range(n):
            num = 0.0
            den = 0.0
            for k in range(indptr[j], indptr[j + 1]):
                i = indices[k]
                m = weights[k] * (powers[j] + powers[i]) * 0.5
                num += m * f[i]
                den += m
            f_new[j] = (num + mu * y[j]) / (den + mu)
            if not np.isfinite(f_new[j]):
                return f_new, t + 1, np.nan
            change = abs(f_new[j] - f[j])
            if change > delta:
                delta = change
        f, f_new = f_new, f
        t += 1
        if delta <= tol:
            break
    return f, t, delta


def solve_fixed_point(g: SparseGraph, y, cfg: SolverConfig) -> SolveReport:
    """Jacobi fixed-point iteration started from ``f = y``.

    Every sweep recomputes the edge coefficients from the current iterate and
    updates all vertices from the previous one.  Stops once
    ``max |f_new - f_old| <= cfg.tol``; running out of sweeps is not an error,
    the report comes back with ``converged=False``.
    """
    y = g.check_vertex_function(y, "y")
    if not np.all(np.isfinite(y)):
        raise SolverError("y contains non-finite values")
    f, t, delta = _jacobi_kernel(
        np.asarray(g.indptr, dtype=np.int64), np.asarray(g.indices, dtype=np.int64),
        np.asarray(g.weights, dtype=float), np.ascontiguousarray(y, dtype=float),
        float(cfg.p), float(cfg.mu), float(cfg.epsilon), float(cfg.tol), int(cfg.max_iter))
    if np.isnan(delta):
        raise SolverError(f"non-finite iterate at sweep {t} (p={cfg.p})")
    if g.n == 0:
        delta = 0.0
    converged = bool(delta <= cfg.tol)
    if not converged:
        log.warning("p=%g: no convergence after %d sweeps (delta=%.3g)", cfg.p, t, delta)
    return SolveReport(f=f, iterations=int(t), final_delta=float(delta),
                       residual=stationarity_residual(g, f, y, cfg), converged=converged)


def solve_p2_direct(g: SparseGraph, y, mu: float = 1.0, method: str = "direct") -> np.ndarray:
    """Solve ``(L + mu I) f = mu y`` for the p = 2 case.

    ``method`` is ``"direct"`` (sparse LU) or ``"cg"`` (conjugate gradient,
    relative tolerance 1e-14).
    """
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    y = g.check_vertex_function(y, "y")
    if g.n == 0:
        return np.zeros(0)
    L = _laplacian_matrix(g)
    A = (L + mu * identity(g.n, format="csr")).tocsc()
    b = mu * y
    if method == "direct":
        f = np.atleast_1d(spsolve(A, b))
    elif method == "cg":
        f, info = cg(A, b, rtol=1e-14, atol=0.0, maxiter=10 * g.n + 100)
        if info != 0:
            raise SolverError(f"conjugate gradient did not converge (info={info})")
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(f)):
        raise SolverError("direct solve produced non-finite values")
    res = np.max(np.abs(laplacian(g, f) + mu * (f - y)))
    scale = (1.0 + mu + float(np.max(g.degrees, initial=0.0))) * max(1.0, float(np.max(np.abs(b))))
    if res > 1e-12 * scale:
        raise SolverError(f"linear solve residual {res:.3g} too large")
    return f


def _laplacian_matrix(g: SparseGraph):
    W = g.to_scipy()
    return (diags(g.degrees) - W).tocsr()
