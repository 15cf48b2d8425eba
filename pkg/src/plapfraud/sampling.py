"""Datasets, k-means, Cluster-Centroids under-sampling and train/test splits."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist

log = logging.getLogger(__name__)

FRAUD = 1
NORMAL = 0

_CHUNK = 8192


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature matrix with binary labels (1 = fraud, 0 = normal).

    ``train_mask`` is ``None`` until a partition has been assigned.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] = ()
    train_mask: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            raise ValueError(f"features must be 2-d, got shape {X.shape}")
        labels = np.asarray(self.labels)
        if labels.shape != (X.shape[0],):
            raise ValueError(
                f"{labels.shape[0] if labels.ndim else 0} labels for {X.shape[0]} rows")
        if not np.all((labels == FRAUD) | (labels == NORMAL)):
            raise ValueError("labels must be 0 (normal) or 1 (fraud)")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", labels.astype(np.int8))
        names = tuple(self.feature_names) or tuple(f"x{c}" for c in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ValueError(f"{len(names)} feature names for {X.shape[1]} columns")
        object.__setattr__(self, "feature_names", names)
        if self.train_mask is not None:
            mask = np.asarray(self.train_mask, dtype=bool)
            if mask.shape != (X.shape[0],):
                raise ValueError("partition length does not match row count")
            object.__setattr__(self, "train_mask", mask)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def fraud_count(self) -> int:
        return int(np.count_nonzero(self.labels == FRAUD))

    @property
    def normal_count(self) -> int:
        return int(np.count_nonzero(self.labels == NORMAL))

    @property
    def test_mask(self) -> np.ndarray | None:
        return None if self.train_mask is None else ~self.train_mask

    def class_counts(self) -> dict[str, int]:
        return {"fraud": self.fraud_count, "normal": self.normal_count}


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: tuple[float, ...] = field(default=(), repr=False)


def _kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    m = X.shape[0]
    x_sq = np.einsum("ij,ij->i", X, X)

    def sq_dist_to(idx):
        d = x_sq - 2.0 * (X @ X[idx]) + x_sq[idx]
        np.maximum(d, 0.0, out=d)
        d[idx] = 0.0
        return d

    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(m)
    closest = sq_dist_to(chosen[0])
    for c in range(1, k):
        cum = np.cumsum(closest)
        if cum[-1] > 0:
            idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
            idx = min(idx, m - 1)
            while closest[idx] == 0:
                # rounding can land the draw on an already-covered point
                idx = (idx + 1) % m
        else:
            idx = int(rng.integers(m))
        chosen[c] = idx
        np.minimum(closest, sq_dist_to(idx), out=closest)
    return X[chosen].copy()


def _assign(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    # ||x||^2 is constant per row and does not affect the argmin
    c_sq = np.sum(C * C, axis=1)
    neg2_ct = -2.0 * C.T
    out = np.empty(X.shape[0], dtype=np.int64)
    for start in range(0, X.shape[0], _CHUNK):
        d = X[start:start + _CHUNK] @ neg2_ct
        d += c_sq
        out[start:start + _CHUNK] = np.argmin(d, axis=1)
    return out


class _BoundedAssigner:
    """Nearest-centroid assignment with Hamerly's triangle-inequality bounds.

    Keeps, per point, an upper bound on the distance to its own centroid and a
    lower bound on the distance to every other one.  Points whose bounds prove
    their centroid is still the closest are skipped, which makes the late Lloyd
    iterations (few moving points) far cheaper than a full distance scan.  The
    bounds are padded so that rounding can only cause extra rescans.
    """

    _PAD = 1e-9

    def __init__(self, X: np.ndarray, C: np.ndarray):
        self.X = X
        self.x_sq = np.einsum("ij,ij->i", X, X)
        m = X.shape[0]
        self.assign = np.empty(m, dtype=np.int64)
        self.upper = np.empty(m)
        self.lower = np.empty(m)
        self.C = C.copy()
        self._rescan(np.arange(m))

    def _rescan(self, rows: np.ndarray) -> None:
        X, C = self.X, self.C
        c_sq = np.sum(C * C, axis=1)
        neg2_ct = -2.0 * C.T
        err = 64 * np.finfo(float).eps * c_sq.max()
        for start in range(0, rows.size, _CHUNK):
            r = rows[start:start + _CHUNK]
            d = X[r] @ neg2_ct
            d += c_sq
            a = np.argmin(d, axis=1)
            self.assign[r] = a
            self.upper[r] = np.sqrt(np.sum((X[r] - C[a]) ** 2, axis=1))
            if C.shape[0] == 1:
                self.lower[r] = np.inf
                continue
            d[np.arange(r.size), a] = np.inf
            second = d.min(axis=1) + self.x_sq[r]
            slack = 64 * np.finfo(float).eps * self.x_sq[r] + err
            self.lower[r] = np.sqrt(np.maximum(second - slack, 0.0))

    def invalidate(self, rows: np.ndarray, assign: np.ndarray) -> None:
        """Adopt an externally edited assignment; ``rows`` get rescanned next time."""
        self.assign = assign.copy()
        self.upper[rows] = np.inf
        self.lower[rows] = 0.0

    def update(self, C_new: np.ndarray) -> np.ndarray:
        shift = np.sqrt(np.sum((C_new - self.C) ** 2, axis=1))
        self.C = C_new.copy()
        self.upper += shift[self.assign]
        self.upper *= 1 + self._PAD
        k = C_new.shape[0]
        if k > 1:
            self.lower -= shift.max()
            self.lower *= 1 - self._PAD
            half = 0.5 * _min_other_distance(C_new) * (1 - self._PAD)
            bound = np.maximum(half[self.assign], self.lower)
        else:
            bound = np.full(self.assign.size, np.inf)
        cand = np.flatnonzero(self.upper > bound)
        if cand.size:
            own = np.sqrt(np.sum((self.X[cand] - C_new[self.assign[cand]]) ** 2, axis=1))
            self.upper[cand] = own * (1 + self._PAD)
            cand = cand[self.upper[cand] > bound[cand]]
            self._rescan(cand)
        return self.assign.copy()


def _min_other_distance(C: np.ndarray) -> np.ndarray:
    out = np.empty(C.shape[0])
    for start in range(0, C.shape[0], 1024):
        d = cdist(C[start:start + 1024], C)
        d[np.arange(d.shape[0]), np.arange(start, start + d.shape[0])] = np.inf
        out[start:start + 1024] = d.min(axis=1)
    return out


def _point_costs(X: np.ndarray, C: np.ndarray, assign: np.ndarray) -> np.ndarray:
    costs = np.empty(X.shape[0])
    for start in range(0, X.shape[0], _CHUNK):
        sl = slice(start, start + _CHUNK)
        costs[sl] = np.sum((X[sl] - C[assign[sl]]) ** 2, axis=1)
    return costs


def _centroid_means(X: np.ndarray, assign: np.ndarray, k: int) -> np.ndarray:
    counts = np.bincount(assign, minlength=k).astype(float)
    sums = np.stack([np.bincount(assign, weights=X[:, c], minlength=k)
                     for c in range(X.shape[1])], axis=1)
    return sums / counts[:, None]


def _repair_empty(X, C, assign, k):
    counts = np.bincount(assign, minlength=k)
    empty = np.flatnonzero(counts == 0)
    if empty.size == 0:
        return assign, C
    assign = assign.copy()
    C = C.copy()
    costs = _point_costs(X, C, assign)
    # farthest points first; never strip a cluster of its last member
    for idx in np.argsort(-costs, kind="stable"):
        if empty.size == 0:
            break
        src = assign[idx]
        if counts[src] <= 1:
            continue
        dst = empty[0]
        empty = empty[1:]
        counts[src] -= 1
        counts[dst] += 1
        assign[idx] = dst
        C[dst] = X[idx]
    return assign, C


def kmeans(X, k: int, seed: int = 0, max_iter: int = 300, tol: float = 1e-6) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding.

    Stops when the assignment no longer changes or the inertia decreases by
    less than ``tol`` relative to its previous value.  Clusters that end up
    empty after an assignment step are refilled with the points farthest from
    their current centroid.  The result depends only on ``(X, k, seed)``.
    """
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-d array")
    m = X.shape[0]
    if int(k) != k or not 1 <= k <= m:
        raise ValueError(f"k must be an integer in [1, {m}], got {k}")
    k = int(k)
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    rng = np.random.default_rng(seed)
    C = _kmeans_pp(X, k, rng)
    assigner = _BoundedAssigner(X, C)
    history: list[float] = []
    prev_assign = None
    it = 0
    for it in range(1, max_iter + 1):
        raw = assigner.assign.copy() if it == 1 else assigner.update(C)
        assign, C = _repair_empty(X, C, raw, k)
        moved = np.flatnonzero(assign != raw)
        if moved.size:
            assigner.invalidate(moved, assign)
        history.append(float(np.sum(_point_costs(X, C, assign))))
        C = _centroid_means(X, assign, k)
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        if len(history) > 1:
            prev = history[-2]
            if prev == 0 or (prev - history[-1]) <= tol * prev:
                break
        prev_assign = assign
    inertia = float(np.sum(_point_costs(X, C, assign)))
    history.append(inertia)
    return KMeansResult(centroids=C, assignments=assign, inertia=inertia,
                        n_iter=it, inertia_history=tuple(history))


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def centroid_count(minority: int, ratio: float) -> int:
    """Number of majority centroids giving ``minority / k ~= ratio``."""
    if not 0 < ratio <= 1:
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    return max(1, _round_half_up(minority / ratio))


def cluster_centroids_undersample(ds: LabeledDataset, ratio: float = 0.4,
                                  seed: int = 0, max_iter: int = 300) -> LabeledDataset:
    """Replace the normal (majority) rows by k-means centroids.

    All fraud rows are kept unchanged and come first in the output, followed
    by ``k = round(n_fraud / ratio)`` centroid rows labelled normal.
    """
    n_min, n_maj = ds.fraud_count, ds.normal_count
    if n_min == 0 or n_maj == 0:
        raise ValueError("both classes must be present to under-sample")
    k = centroid_count(n_min, ratio)
    if k > n_maj:
        raise ValueError(
            f"ratio {ratio} needs {k} majority centroids but only {n_maj} normal rows exist")
    majority = ds.features[ds.labels == NORMAL]
    log.info("k-means with k=%d on %d normal rows", k, n_maj)
    km = kmeans(majority, k, seed=seed, max_iter=max_iter)
    features = np.vstack([ds.features[ds.labels == FRAUD], km.centroids])
    labels = np.concatenate([np.full(n_min, FRAUD, np.int8), np.full(k, NORMAL, np.int8)])
    return LabeledDataset(features, labels, ds.feature_names)


def stratified_split(ds: LabeledDataset, train_count: int, seed: int = 0) -> LabeledDataset:
    """Random train/test partition with ``train_count`` training rows.

    The per-class training counts are the proportional shares rounded by the
    largest-remainder rule, so each class is within one row of its exact
    share and the total is exact.
    """
    n = ds.n
    if int(train_count) != train_count or not 0 < train_count < n:
        raise ValueError(f"train_count must be an integer in (0, {n}), got {train_count}")
    train_count = int(train_count)
    classes = (FRAUD, NORMAL)
    sizes = np.array([np.count_nonzero(ds.labels == c) for c in classes])
    exact = sizes * train_count / n
    alloc = np.floor(exact).astype(int)
    short = train_count - int(alloc.sum())
    for c in np.argsort(-(exact - alloc), kind="stable")[:short]:
        alloc[c] += 1
    rng = np.random.default_rng(seed)
    mask = np.zeros(n, dtype=bool)
    for c, take in zip(classes, alloc):
        idx = np.flatnonzero(ds.labels == c)
        mask[rng.permutation(idx)[:take]] = True
    return replace(ds, train_mask=mask)
