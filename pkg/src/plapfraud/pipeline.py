"""The fraud-detection experiment: ingestion, kNN graph, labelling, scoring.

The flow is::

    load_csv -> cluster_centroids_undersample -> stratified_split
             -> build_knn_graph -> for each p: make_label_vector,
                solve_fixed_point, classify, evaluate
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .graph import SparseGraph, build_graph
from .operators import DEFAULT_EPSILON
from .sampling import (FRAUD, NORMAL, LabeledDataset, cluster_centroids_undersample,
                       stratified_split)
from .solver import SolverConfig, solve_fixed_point

log = logging.getLogger(__name__)

FEATURE_COLUMNS = ("Time",) + tuple(f"V{i}" for i in range(1, 29)) + ("Amount",)
LABEL_COLUMN = "Class"
DEFAULT_P_VALUES = tuple(round(1.0 + 0.1 * i, 1) for i in range(11))


class DataError(ValueError):
    """Malformed input data."""


class PipelineError(RuntimeError):
    """A stage of the experiment failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class DegenerateFeatureWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GraphBuildConfig:
    k: int = 5
    t: float = 0.1
    standardize: bool = True

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if not self.t > 0:
            raise ValueError(f"t must be positive, got {self.t}")


@dataclass(frozen=True)
class EvaluationReport:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total

    def to_dict(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn,
                "accuracy": self.accuracy}


# -- ingestion ---------------------------------------------------------------

def load_csv(path) -> LabeledDataset:
    """Read the public credit-card fraud CSV (``Time, V1..V28, Amount, Class``).

    Extra columns are ignored.  Errors name the offending line and column.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise DataError(f"{path}: file is empty") from None
    missing = [c for c in FEATURE_COLUMNS + (LABEL_COLUMN,) if c not in df.columns]
    if missing:
        raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
    if len(df) == 0:
        raise DataError(f"{path}: header present but no data rows")

    cols = list(FEATURE_COLUMNS) + [LABEL_COLUMN]
    values = np.empty((len(df), len(cols)))
    for c, name in enumerate(cols):
        raw = df[name].str.strip()
        try:
            # correctly rounded; pd.to_numeric can be off by an ulp
            num = raw.to_numpy(dtype=float)
        except ValueError:
            num = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=float)
        bad = ~np.isfinite(num)
        if bad.any():
            r = int(np.flatnonzero(bad)[0])
            # +2: one for the header, one for 1-based line numbers
            raise DataError(
                f"{path}: line {r + 2}, column {name}: non-numeric value {df[name].iloc[r]!r}")
        values[:, c] = num
    labels = values[:, -1]
    bad = (labels != 0) & (labels != 1)
    if bad.any():
        r = int(np.flatnonzero(bad)[0])
        raise DataError(f"{path}: line {r + 2}, column {LABEL_COLUMN}: "
                        f"label must be 0 or 1, got {df[LABEL_COLUMN].iloc[r]!r}")
    ds = LabeledDataset(values[:, :-1], labels.astype(np.int8), FEATURE_COLUMNS)
    log.info("loaded %s: %d rows, %d fraud, %d normal",
             path, ds.n, ds.fraud_count, ds.normal_count)
    return ds


def save_csv(ds: LabeledDataset, path) -> None:
    """Write features plus a ``Class`` column; floats round-trip exactly."""
    df = pd.DataFrame(ds.features, columns=list(ds.feature_names))
    df[LABEL_COLUMN] = ds.labels.astype(int)
    df.to_csv(path, index=False, float_format="%.17g")


# -- graph -------------------------------------------------------------------

def standardize(X: np.ndarray) -> np.ndarray:
    """Column z-scores; zero-variance columns are centred only (with a warning)."""
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    flat = std == 0
    if flat.any():
        warnings.warn(f"{int(flat.sum())} zero-variance feature column(s); "
                      "their scale is left at 1", DegenerateFeatureWarning, stacklevel=2)
        std = np.where(flat, 1.0, std)
    return (X - mean) / std


def knn_indices(X: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """k nearest neighbours of every row by squared Euclidean distance.

    Returns ``(idx, dist)``, both ``n x k``.  A row is never its own
    neighbour; equal distances go to the lower index.
    """
    n, d = X.shape
    if k >= n:
        raise ValueError(f"k={k} needs at least {k + 1} points, got {n}")
    chunk = max(1, (1 << 24) // max(1, n * d))
    idx = np.empty((n, k), dtype=np.int64)
    dist = np.empty((n, k))
    for start in range(0, n, chunk):
        rows = np.arange(start, min(n, start + chunk))
        # explicit differences so duplicate rows give exactly zero
        D = np.sum((X[rows, None, :] - X[None, :, :]) ** 2, axis=2)
        D[np.arange(rows.size), rows] = np.inf
        order = np.argsort(D, axis=1, kind="stable")[:, :k]
        idx[rows] = order
        dist[rows] = np.take_along_axis(D, order, axis=1)
    return idx, dist


def build_knn_graph(ds: LabeledDataset, cfg: GraphBuildConfig = GraphBuildConfig()) -> SparseGraph:
    """Symmetric kNN-union graph with weights ``exp(-||x_i - x_j||^2 / t)``."""
    X = standardize(ds.features) if cfg.standardize else ds.features
    n = X.shape[0]
    if cfg.k >= n:
        raise ValueError(f"k={cfg.k} needs at least {cfg.k + 1} rows, got {n}")
    idx, dist = knn_indices(X, cfg.k)
    src = np.repeat(np.arange(n), cfg.k)
    dst = idx.ravel()
    w = np.exp(-dist.ravel() / cfg.t)
    zero = int(np.count_nonzero(w == 0))
    if zero:
        # kept so the edge set stays the kNN union; such edges carry no coupling
        log.warning("%d of %d kNN weights underflow to 0 at t=%g", zero, w.size, cfg.t)
    return build_graph(n, np.column_stack([src, dst, w]))


# -- labelling and scoring ---------------------------------------------------

def make_label_vector(ds: LabeledDataset) -> np.ndarray:
    """+1 on training fraud rows, -1 on training normal rows, 0 on test rows."""
    if ds.train_mask is None:
        raise ValueError("dataset has no train/test partition")
    y = np.where(ds.labels == FRAUD, 1.0, -1.0)
    y[~ds.train_mask] = 0.0
    return y


def classify(f) -> np.ndarray:
    """Sign rule: positive score -> fraud, zero or negative -> normal."""
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError("scores contain non-finite values")
    return np.where(f > 0, FRAUD, NORMAL).astype(np.int8)


def evaluate(pred, truth, test_mask) -> EvaluationReport:
    """Confusion counts and accuracy over the test rows, fraud = positive."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    test_mask = np.asarray(test_mask, dtype=bool)
    if not pred.shape == truth.shape == test_mask.shape:
        raise ValueError("pred, truth and test_mask must have equal lengths")
    if not test_mask.any():
        raise ValueError("test mask is empty")
    p, t = pred[test_mask] == FRAUD, truth[test_mask] == FRAUD
    return EvaluationReport(tp=int(np.sum(p & t)), tn=int(np.sum(~p & ~t)),
                            fp=int(np.sum(p & ~t)), fn=int(np.sum(~p & t)))


# -- experiment --------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    ratio: float = 0.4
    train_count: int = 1208
    k: int = 5
    t: float = 0.1
    standardize: bool = True
    mu: float = 1.0
    epsilon: float = DEFAULT_EPSILON
    tol: float = 1e-9
    max_iter: int = 2000
    p_values: tuple[float, ...] = DEFAULT_P_VALUES
    seed_sample: int = 0
    seed_split: int = 0
    kmeans_max_iter: int = 300

    def __post_init__(self):
        if not 0 < self.ratio <= 1:
            raise ValueError(f"ratio must be in (0, 1], got {self.ratio}")
        for name in ("train_count", "kmeans_max_iter"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v}")
        if not self.p_values:
            raise ValueError("p_values must not be empty")

    def graph_config(self) -> GraphBuildConfig:
        return GraphBuildConfig(k=self.k, t=self.t, standardize=self.standardize)

    def solver_config(self, p: float) -> SolverConfig:
        return SolverConfig(p=p, mu=self.mu, epsilon=self.epsilon,
                            tol=self.tol, max_iter=self.max_iter)


@dataclass
class ExperimentReport:
    config: dict
    class_counts: dict
    evaluations: dict = field(default_factory=dict)
    solves: dict = field(default_factory=dict)
    graph: dict = field(default_factory=dict)

    @property
    def per_p(self) -> dict[float, float]:
        return {p: ev.accuracy for p, ev in self.evaluations.items()}

    @property
    def all_converged(self) -> bool:
        return all(s["converged"] for s in self.solves.values())

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "seeds": {"sample": self.config["seed_sample"], "split": self.config["seed_split"]},
            "class_counts": self.class_counts,
            "graph": self.graph,
            "per_p": [
                {"p": p, **self.evaluations[p].to_dict(), "solver": self.solves[p]}
                for p in self.evaluations
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def format_table(self) -> str:
        lines = ["Accuracy Performance Measures (%)"]
        width = max(len(f"p={p:g}") for p in self.evaluations) if self.evaluations else 3
        for p, ev in self.evaluations.items():
            flag = "" if self.solves[p]["converged"] else "  (not converged)"
            lines.append(f"{f'p={p:g}':<{width}}  {100 * ev.accuracy:6.2f}{flag}")
        return "\n".join(lines) + "\n"

    def write(self, outdir) -> tuple[Path, Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        js, txt = outdir / "report.json", outdir / "table.txt"
        js.write_text(self.to_json())
        txt.write_text(self.format_table())
        return js, txt


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except (ValueError, OSError, RuntimeError) as exc:
        raise PipelineError(name, str(exc)) from exc


def run_experiment(source, cfg: ExperimentConfig = ExperimentConfig()) -> ExperimentReport:
    """Run the whole experiment on a CSV path or an in-memory dataset."""
    if isinstance(source, LabeledDataset):
        raw = source
    else:
        raw = _stage("load", load_csv, source)
    reduced = _stage("undersample", cluster_centroids_undersample, raw, cfg.ratio,
                     cfg.seed_sample, cfg.kmeans_max_iter)
    split = _stage("split", stratified_split, reduced, cfg.train_count, cfg.seed_split)
    graph = _stage("graph", build_knn_graph, split, cfg.graph_config())
    y = _stage("labels", make_label_vector, split)

    train = split.train_mask
    counts = {
        "input": raw.class_counts(),
        "reduced": reduced.class_counts(),
        "train": {"fraud": int(np.sum(train & (split.labels == FRAUD))),
                  "normal": int(np.sum(train & (split.labels == NORMAL)))},
        "test": {"fraud": int(np.sum(~train & (split.labels == FRAUD))),
                 "normal": int(np.sum(~train & (split.labels == NORMAL)))},
    }
    conf = asdict(cfg)
    conf["p_values"] = list(cfg.p_values)
    report = ExperimentReport(
        config=conf, class_counts=counts,
        graph={"vertices": graph.n, "edges": graph.n_edges,
               "min_weight": float(graph.weights.min()) if graph.n_slots else None,
               "max_weight": float(graph.weights.max()) if graph.n_slots else None})
    for p in cfg.p_values:
        p = float(p)
        sol = _stage(f"solve p={p:g}", solve_fixed_point, graph, y, cfg.solver_config(p))
        pred = _stage("classify", classify, sol.f)
        report.evaluations[p] = _stage("evaluate", evaluate, pred, split.labels, ~train)
        report.solves[p] = {"iterations": sol.iterations, "converged": sol.converged,
                            "final_delta": sol.final_delta, "residual": sol.residual}
        log.info("p=%g accuracy %.4f (%d sweeps, converged=%s)",
                 p, report.evaluations[p].accuracy, sol.iterations, sol.converged)
    return report
