"""Laplacian, curvature and p-Laplacian operators and their energies.

All variation-dependent operators share the smoothed local variation
``sqrt(sum_j w_ij (f_j - f_i)^2 + eps)``; the p = 2 case uses it too even
though the exponent removes it, so the reductions

    p_laplacian(g, f, 2, eps) == laplacian(g, f)
    p_laplacian(g, f, 1, eps) == curvature(g, f, eps)

hold bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import SparseGraph, inner_product_V

DEFAULT_EPSILON = 1e-10


@dataclass(frozen=True)
class LocalVariation:
    values: np.ndarray
    epsilon: float


def _check_epsilon(epsilon: float) -> None:
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")


def _check_p(p: float) -> None:
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")


def _edge_differences(g: SparseGraph, f: np.ndarray) -> np.ndarray:
    # f_i - f_j on slot i -> j, i.e. "centre minus neighbour"
    return f[g.rows] - f[g.indices]


def laplacian(g: SparseGraph, f) -> np.ndarray:
    """(Lf)_j = d_j f_j - sum_{i~j} w_ij f_i."""
    f = g.check_vertex_function(f)
    return g.row_sum(g.weights * _edge_differences(g, f))


def local_variation(g: SparseGraph, f, epsilon: float = DEFAULT_EPSILON) -> LocalVariation:
    """Per-vertex smoothed variation ``sqrt(sum_j w_ij (f_j - f_i)^2 + epsilon)``."""
    _check_epsilon(epsilon)
    f = g.check_vertex_function(f)
    sq = g.row_sum(g.weights * _edge_differences(g, f) ** 2)
    return LocalVariation(np.sqrt(sq + epsilon), float(epsilon))


def _variation_powers(g: SparseGraph, f: np.ndarray, p: float, epsilon: float) -> np.ndarray:
    """||d_i f||^(p-2) per vertex, via exp/log since variations are >= sqrt(eps)."""
    v = local_variation(g, f, epsilon).values
    return np.exp((p - 2.0) * np.log(v))


def edge_coefficients(g: SparseGraph, f, p: float, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """m_ij = w_ij (||d_i f||^(p-2) + ||d_j f||^(p-2)) / 2 on every directed slot."""
    _check_p(p)
    _check_epsilon(epsilon)
    f = g.check_vertex_function(f)
    powers = _variation_powers(g, f, p, epsilon)
    return g.weights * (powers[g.rows] + powers[g.indices]) * 0.5


def p_laplacian(g: SparseGraph, f, p: float, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Graph p-Laplacian with smoothed variations.

    (L_p f)_j = 1/2 sum_{i~j} w_ij (||d_i f||^(p-2) + ||d_j f||^(p-2)) (f_j - f_i)
    """
    f = g.check_vertex_function(f)
    m = edge_coefficients(g, f, p, epsilon)
    return g.row_sum(m * _edge_differences(g, f))


def curvature(g: SparseGraph, f, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Curvature operator, the p = 1 member of the p-Laplacian family."""
    return p_laplacian(g, f, 1.0, epsilon)


def energy(g: SparseGraph, f, p: float, epsilon: float = DEFAULT_EPSILON) -> float:
    """S_p(f) = (1/p) sum_i ||d_i f||^p with smoothed variations."""
    _check_p(p)
    v = local_variation(g, f, epsilon).values
    return float(np.sum(v ** p) / p)


def objective(g: SparseGraph, f, y, p: float, mu: float,
              epsilon: float = DEFAULT_EPSILON) -> float:
    """Regularised objective S_p(f) + mu/2 ||f - y||^2."""
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    f = g.check_vertex_function(f)
    y = g.check_vertex_function(y, "y")
    r = f - y
    return energy(g, f, p, epsilon) + 0.5 * mu * inner_product_V(r, r)
