"""Sparse symmetric weighted graphs and first-order difference operators.

Vertex functions are plain 1-d float arrays of length ``n``.  Edge functions
carry one value per *directed* slot of the graph's CSR layout: every stored
undirected edge ``{i, j}`` occupies slot ``i -> j`` in row ``i`` and slot
``j -> i`` in row ``j``.  ``SparseGraph.reverse[k]`` is the slot of the
opposite orientation of slot ``k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse


class GraphError(ValueError):
    """Raised for malformed graph input or mismatched graph functions."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SparseGraph:
    """Undirected weighted graph in CSR form, both orientations stored.

    Neighbour lists are sorted by index, so every sweep over a row visits
    neighbours in the same order.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    degrees: np.ndarray
    rows: np.ndarray = field(repr=False)
    reverse: np.ndarray = field(repr=False)

    @property
    def n_edges(self) -> int:
        """Number of undirected edges."""
        return self.indices.size // 2

    @property
    def n_slots(self) -> int:
        """Number of directed edge slots (twice the undirected edge count)."""
        return self.indices.size

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def slot(self, i: int, j: int) -> int:
        """Slot index of the directed edge ``i -> j``."""
        row = self.neighbors(i)
        pos = int(np.searchsorted(row, j))
        if pos >= row.size or row[pos] != j:
            raise KeyError(f"no edge ({i}, {j})")
        return int(self.indptr[i]) + pos

    def weight(self, i: int, j: int) -> float:
        """w_ij, zero for absent pairs."""
        try:
            return float(self.weights[self.slot(i, j)])
        except KeyError:
            return 0.0

    def neighbor_counts(self) -> np.ndarray:
        return np.diff(self.indptr)

    def edge_list(self) -> list[tuple[int, int, float]]:
        """Undirected edges as ``(i, j, w)`` with ``i < j``, sorted."""
        mask = self.rows < self.indices
        return [(int(i), int(j), float(w)) for i, j, w in
                zip(self.rows[mask], self.indices[mask], self.weights[mask])]

    def to_scipy(self) -> sparse.csr_matrix:
        return sparse.csr_matrix((self.weights, self.indices, self.indptr),
                                 shape=(self.n, self.n))

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def row_sum(self, slot_values: np.ndarray) -> np.ndarray:
        """Sum per-slot values over each row, in neighbour-list order."""
        return np.bincount(self.rows, weights=slot_values, minlength=self.n)

    def check_vertex_function(self, f, name: str = "f") -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.n,):
            raise GraphError(
                f"{name} has shape {f.shape}, expected ({self.n},)")
        return f


def _assemble(n: int, i: np.ndarray, j: np.ndarray, w: np.ndarray,
              check_symmetric: bool = True) -> SparseGraph:
    # i, j, w hold both orientations
    order = np.lexsort((j, i))
    i, j, w = i[order], j[order], w[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(i, minlength=n), out=indptr[1:])
    # slot of (j -> i) for each slot (i -> j): position of (j, i) in the
    # lexicographic order of (row, col) pairs
    key = i * n + j
    reverse = np.searchsorted(key, j * n + i)
    if check_symmetric and key.size:
        found = key[np.minimum(reverse, key.size - 1)] == j * n + i
        if not np.all(found):
            raise GraphError("edge set is not symmetric")
    degrees = np.bincount(i, weights=w, minlength=n)
    return SparseGraph(
        n=n,
        indptr=_frozen(indptr),
        indices=_frozen(j.astype(np.int64)),
        weights=_frozen(w.astype(float)),
        degrees=_frozen(degrees),
        rows=_frozen(i.astype(np.int64)),
        reverse=_frozen(reverse.astype(np.int64)),
    )


def build_graph(n: int, edges) -> SparseGraph:
    """Build a graph from ``(i, j, w)`` triples, one per undirected edge.

    Either orientation may be given, and a pair may appear twice if both
    copies carry the same weight; it is stored once.

    Raises
    ------
    GraphError
        On out-of-range indices, negative or non-finite weights, self-loops
        or conflicting weights for the same pair.
    """
    if int(n) != n or n < 0:
        raise GraphError(f"vertex count must be a nonnegative integer, got {n!r}")
    n = int(n)
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                     dtype=float)
    if arr.size == 0:
        arr = arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise GraphError("edges must be (i, j, w) triples")
    ii, jj, w = arr[:, 0], arr[:, 1], arr[:, 2]
    if np.any(ii != np.round(ii)) or np.any(jj != np.round(jj)):
        raise GraphError("vertex indices must be integers")
    ii, jj = ii.astype(np.int64), jj.astype(np.int64)
    bad = (ii < 0) | (ii >= n) | (jj < 0) | (jj >= n)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise GraphError(f"edge {k} ({ii[k]}, {jj[k]}) has an index outside [0, {n})")
    if np.any(ii == jj):
        k = int(np.flatnonzero(ii == jj)[0])
        raise GraphError(f"edge {k} is a self-loop at vertex {ii[k]}")
    if not np.all(np.isfinite(w)):
        raise GraphError("edge weights must be finite")
    if np.any(w < 0):
        k = int(np.flatnonzero(w < 0)[0])
        raise GraphError(f"edge {k} ({ii[k]}, {jj[k]}) has negative weight {w[k]}")

    lo, hi = np.minimum(ii, jj), np.maximum(ii, jj)
    key = lo * n + hi
    order = np.lexsort((w, key))
    key, lo, hi, w = key[order], lo[order], hi[order], w[order]
    first = np.ones(key.size, dtype=bool)
    first[1:] = key[1:] != key[:-1]
    dup = ~first
    if np.any(dup):
        # sorted by weight within a key, so a conflict shows up as a weight jump
        same_key_diff_w = dup & (w != np.roll(w, 1))
        if np.any(same_key_diff_w):
            k = int(np.flatnonzero(same_key_diff_w)[0])
            raise GraphError(
                f"pair ({lo[k]}, {hi[k]}) listed with conflicting weights")
    lo, hi, w = lo[first], hi[first], w[first]
    return _assemble(n,
                     np.concatenate([lo, hi]),
                     np.concatenate([hi, lo]),
                     np.concatenate([w, w]))


def from_scipy(W) -> SparseGraph:
    """Build a graph from a symmetric sparse or dense weight matrix."""
    W = sparse.coo_matrix(W)
    if W.shape[0] != W.shape[1]:
        raise GraphError("weight matrix must be square")
    upper = W.row < W.col
    lower = W.row > W.col
    if np.any((W.row == W.col) & (W.data != 0)):
        raise GraphError("weight matrix has nonzero diagonal")
    up = sparse.coo_matrix((W.data[upper], (W.row[upper], W.col[upper])), shape=W.shape)
    lo = sparse.coo_matrix((W.data[lower], (W.col[lower], W.row[lower])), shape=W.shape)
    if (up != lo).nnz:
        raise GraphError("weight matrix is not symmetric")
    edges = np.column_stack([W.row[upper], W.col[upper], W.data[upper]])
    return build_graph(W.shape[0], edges)


@dataclass(frozen=True, eq=False)
class EdgeFunction:
    """One real value per directed slot of ``graph``."""

    graph: SparseGraph
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.graph.n_slots,):
            raise GraphError(
                f"edge function has shape {values.shape}, "
                f"expected ({self.graph.n_slots},)")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, graph: SparseGraph) -> "EdgeFunction":
        return cls(graph, np.zeros(graph.n_slots))

    @classmethod
    def from_dict(cls, graph: SparseGraph, entries: dict) -> "EdgeFunction":
        """Edge function with ``entries[(i, j)]`` on slot ``i -> j``, zero elsewhere."""
        values = np.zeros(graph.n_slots)
        for (i, j), v in entries.items():
            values[graph.slot(i, j)] = v
        return cls(graph, values)

    def __getitem__(self, ij: tuple[int, int]) -> float:
        i, j = ij
        return float(self.values[self.graph.slot(i, j)])


def _same_graph(F: EdgeFunction, g: SparseGraph) -> None:
    if F.graph is not g:
        raise GraphError("edge function belongs to a different graph")


def inner_product_V(f, g) -> float:
    """sum_i f_i g_i."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != g.shape or f.ndim != 1:
        raise GraphError(f"vertex functions differ in shape: {f.shape} vs {g.shape}")
    return float(np.dot(f, g))


def inner_product_E(F: EdgeFunction, G: EdgeFunction) -> float:
    """sum over both orientations of every edge of F_ij G_ij."""
    _same_graph(G, F.graph)
    return float(np.dot(F.values, G.values))


def gradient(g: SparseGraph, f) -> EdgeFunction:
    """(df)_ij = sqrt(w_ij) (f_j - f_i) on every directed slot."""
    f = g.check_vertex_function(f)
    return EdgeFunction(g, np.sqrt(g.weights) * (f[g.indices] - f[g.rows]))


def divergence(g: SparseGraph, F: EdgeFunction) -> np.ndarray:
    """(div F)_j = sum_{i~j} sqrt(w_ij) (F_ji - F_ij), the negative adjoint of ``gradient``."""
    _same_graph(F, g)
    v = F.values
    return g.row_sum(np.sqrt(g.weights) * (v - v[g.reverse]))
