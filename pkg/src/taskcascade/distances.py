"""Pairwise task distances and distance-matrix assembly.

Ten metrics in three families, all computed from training splits only:

* feature family: ``feature`` (normalized Euclidean on flattened features,
  falling back to a mean/variance embedding when shapes differ), ``mmd``
  (RBF maximum mean discrepancy via random Fourier features, median-heuristic
  bandwidth), ``gauss_meancov`` (Gaussian approximation, mean plus covariance
  Frobenius gap), ``cka`` (one minus linear centered kernel alignment);
* target family: ``target`` (Euclidean on targets), ``sym_kl`` and ``js``
  (smoothed histogram divergences), ``wasserstein`` (exact 1-d W1);
* optimization family: ``gradient`` (gradients at initialization) and
  ``model`` (ridge solutions).

Several of these are divergences rather than metrics; all are used purely as
nonnegative edge weights for tree construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import wasserstein_distance

from .errors import ConfigError, DegenerateDesignError, ShapeMismatchError, TaskCascadeError
from .linmodel import default_ridge_lambda, ridge_solution
from .seeding import substream
from .tasks import TaskCollection, TaskDataset

FEATURE_METRICS = ("feature", "mmd", "gauss_meancov", "cka")
TARGET_METRICS = ("target", "sym_kl", "js", "wasserstein")
OPTIMIZATION_METRICS = ("gradient", "model")
METRIC_NAMES = FEATURE_METRICS + TARGET_METRICS + OPTIMIZATION_METRICS


@dataclass
class DistanceParams:
    """Hyperparameters the metric definitions leave open."""

    rff_dim: int = 256
    hist_bins: int = 32
    hist_smoothing: float = 1e-6
    ridge_lambda: float | None = None  # None: 1e-3 * trace(X^T X) / d per task
    normalize_gradients: bool = True
    standardize: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.rff_dim < 1:
            raise ConfigError("rff_dim must be positive")
        if self.hist_bins < 1:
            raise ConfigError("hist_bins must be positive")
        if self.hist_smoothing <= 0:
            raise ConfigError("hist_smoothing must be positive")


@dataclass
class DistanceMatrix:
    """Symmetric nonnegative pairwise task distances with a zero diagonal."""

    values: np.ndarray
    metric_name: str
    task_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        T = self.values.shape[0]
        if self.values.shape != (T, T):
            raise ShapeMismatchError("distance matrix must be square")
        if not self.task_ids:
            self.task_ids = [f"task{i}" for i in range(T)]
        if len(self.task_ids) != T:
            raise ShapeMismatchError("task_ids length does not match matrix size")
        if not np.isfinite(self.values).all():
            raise ConfigError("distance matrix has non-finite entries")
        if (self.values < 0).any():
            raise ConfigError("distance matrix has negative entries")
        if np.any(np.diag(self.values) != 0.0):
            raise ConfigError("distance matrix diagonal must be zero")
        if not np.array_equal(self.values, self.values.T):
            raise ConfigError("distance matrix must be symmetric")

    @property
    def size(self) -> int:
        return self.values.shape[0]


def _standardized(X: np.ndarray) -> np.ndarray:
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return (X - mu) / sd


def _features(task: TaskDataset, params: DistanceParams) -> np.ndarray:
    X = task.X_train
    return _standardized(X) if params.standardize else X


def _rff_projection(params: DistanceParams, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Shared random Fourier frequencies and phases for dimension d.

    Derived from params.seed only, so every pair of a matrix computation
    (and any standalone pair call with the same params) uses one embedding.
    """
    rng = substream(params.seed, "rff", d)
    freqs = rng.standard_normal((params.rff_dim, d))
    phases = rng.uniform(0.0, 2.0 * np.pi, params.rff_dim)
    return freqs, phases


def median_bandwidth(pooled: np.ndarray) -> float:
    """Median pairwise Euclidean distance; 1.0 when the median degenerates to 0."""
    med = float(np.median(pdist(pooled)))
    return med if med > 0 else 1.0


def _mmd_rff(
    Xu: np.ndarray,
    Xv: np.ndarray,
    params: DistanceParams,
    projection: tuple[np.ndarray, np.ndarray] | None = None,
) -> float:
    if projection is None:
        projection = _rff_projection(params, Xu.shape[1])
    freqs, phases = projection
    sigma = median_bandwidth(np.vstack([Xu, Xv]))
    scale = np.sqrt(2.0 / params.rff_dim)

    def embed(X: np.ndarray) -> np.ndarray:
        return (scale * np.cos(X @ freqs.T / sigma + phases)).mean(axis=0)

    return float(np.linalg.norm(embed(Xu) - embed(Xv)))


def _mean_var_embedding(X: np.ndarray) -> np.ndarray:
    return np.concatenate([X.mean(axis=0), X.var(axis=0)])


def _feature_distance(Xu: np.ndarray, Xv: np.ndarray) -> float:
    if Xu.shape == Xv.shape:
        diff = Xu.ravel() - Xv.ravel()
    else:
        diff = _mean_var_embedding(Xu) - _mean_var_embedding(Xv)
    return float(np.sqrt(np.mean(diff * diff)))


def _gauss_meancov(Xu: np.ndarray, Xv: np.ndarray) -> float:
    if min(Xu.shape[0], Xv.shape[0]) < 2:
        raise DegenerateDesignError("gauss_meancov needs at least 2 samples per task")
    mean_gap = np.linalg.norm(Xu.mean(axis=0) - Xv.mean(axis=0))
    cov_gap = np.linalg.norm(
        np.cov(Xu, rowvar=False) - np.cov(Xv, rowvar=False), ord="fro"
    )
    return float(mean_gap + cov_gap)


def _cka_distance(Xu: np.ndarray, Xv: np.ndarray) -> float:
    """One minus linear CKA, with rows paired by index.

    Unequal sample counts are truncated to the shorter task. Zero-variance
    representations make the alignment undefined; by convention two such
    tasks are at distance 0 and a degenerate/non-degenerate pair at 1.
    """
    n = min(Xu.shape[0], Xv.shape[0])
    if n < 2:
        raise DegenerateDesignError("cka needs at least 2 samples per task")
    Zu = Xu[:n] - Xu[:n].mean(axis=0)
    Zv = Xv[:n] - Xv[:n].mean(axis=0)
    cross = Zu.T @ Zv
    hsic_uv = float(np.sum(cross * cross))
    hsic_uu = float(np.sum((Zu.T @ Zu) ** 2))
    hsic_vv = float(np.sum((Zv.T @ Zv) ** 2))
    if hsic_uu == 0.0 or hsic_vv == 0.0:
        return 0.0 if hsic_uu == hsic_vv else 1.0
    cka = hsic_uv / np.sqrt(hsic_uu * hsic_vv)
    return float(min(max(1.0 - cka, 0.0), 1.0))


def feature_family_distance(
    u: TaskDataset,
    v: TaskDataset,
    metric: str,
    params: DistanceParams | None = None,
    _projection: tuple[np.ndarray, np.ndarray] | None = None,
) -> float:
    """Distance between training feature matrices under the named metric."""
    params = params or DistanceParams()
    Xu, Xv = _features(u, params), _features(v, params)
    if metric == "feature":
        return _feature_distance(Xu, Xv)
    if metric == "mmd":
        return _mmd_rff(Xu, Xv, params, _projection)
    if metric == "gauss_meancov":
        return _gauss_meancov(Xu, Xv)
    if metric == "cka":
        return _cka_distance(Xu, Xv)
    raise ConfigError(f"unknown feature metric {metric!r}; valid: {FEATURE_METRICS}")


def _pair_histograms(
    yu: np.ndarray, yv: np.ndarray, params: DistanceParams
) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed histograms of two target vectors over their joint range."""
    lo = min(yu.min(), yv.min())
    hi = max(yu.max(), yv.max())
    if lo == hi:
        p = np.zeros(params.hist_bins)
        p[0] = 1.0
        return p.copy(), p.copy()

    def hist(y: np.ndarray) -> np.ndarray:
        counts, _ = np.histogram(y, bins=params.hist_bins, range=(lo, hi))
        p = counts / counts.sum() + params.hist_smoothing
        return p / p.sum()

    return hist(yu), hist(yv)


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.sum(p * np.log(p / q)))


def target_family_distance(
    u: TaskDataset,
    v: TaskDataset,
    metric: str,
    params: DistanceParams | None = None,
) -> float:
    """Distance between training target vectors under the named metric."""
    params = params or DistanceParams()
    yu, yv = u.y_train, v.y_train
    if metric == "target":
        if yu.shape != yv.shape:
            raise ShapeMismatchError(
                f"target distance needs equal lengths, got {yu.shape[0]} and {yv.shape[0]}"
            )
        return float(np.linalg.norm(yu - yv))
    if metric == "sym_kl":
        p, q = _pair_histograms(yu, yv, params)
        return 0.5 * (_kl(p, q) + _kl(q, p))
    if metric == "js":
        p, q = _pair_histograms(yu, yv, params)
        m = 0.5 * (p + q)
        return float(np.sqrt(max(0.5 * _kl(p, m) + 0.5 * _kl(q, m), 0.0)))
    if metric == "wasserstein":
        return float(wasserstein_distance(yu, yv))
    raise ConfigError(f"unknown target metric {metric!r}; valid: {TARGET_METRICS}")


def optimization_family_distance(
    u: TaskDataset,
    v: TaskDataset,
    metric: str,
    params: DistanceParams | None = None,
) -> float:
    """Distance between optimization-geometry summaries of two tasks."""
    params = params or DistanceParams()
    if u.dim != v.dim:
        raise ShapeMismatchError(
            f"tasks {u.id!r} and {v.id!r} have dimensions {u.dim} != {v.dim}"
        )
    if metric == "gradient":
        gu = u.X_train.T @ u.y_train
        gv = v.X_train.T @ v.y_train
        if params.normalize_gradients:
            nu, nv = np.linalg.norm(gu), np.linalg.norm(gv)
            gu = gu / nu if nu > 0 else gu
            gv = gv / nv if nv > 0 else gv
        return float(np.linalg.norm(gu - gv))
    if metric == "model":
        def solve(t: TaskDataset) -> np.ndarray:
            lam = params.ridge_lambda
            if lam is None:
                lam = default_ridge_lambda(t.X_train)
            return ridge_solution(t.X_train, t.y_train, lam)

        return float(np.linalg.norm(solve(u) - solve(v)))
    raise ConfigError(
        f"unknown optimization metric {metric!r}; valid: {OPTIMIZATION_METRICS}"
    )


def task_distance(
    u: TaskDataset,
    v: TaskDataset,
    metric: str,
    params: DistanceParams | None = None,
    _projection: tuple[np.ndarray, np.ndarray] | None = None,
) -> float:
    """Dispatch to the family implementing the named metric."""
    if metric in FEATURE_METRICS:
        return feature_family_distance(u, v, metric, params, _projection)
    if metric in TARGET_METRICS:
        return target_family_distance(u, v, metric, params)
    if metric in OPTIMIZATION_METRICS:
        return optimization_family_distance(u, v, metric, params)
    raise ConfigError(f"unknown metric {metric!r}; valid: {sorted(METRIC_NAMES)}")


def compute_distance_matrix(
    collection: TaskCollection,
    metric_name: str,
    params: DistanceParams | None = None,
) -> DistanceMatrix:
    """Pairwise distances over all unordered task pairs, training splits only."""
    if metric_name not in METRIC_NAMES:
        raise ConfigError(
            f"unknown metric {metric_name!r}; valid: {sorted(METRIC_NAMES)}"
        )
    params = params or DistanceParams()
    projection = None
    if metric_name == "mmd" and len(collection) > 0:
        projection = _rff_projection(params, collection.dim)

    T = len(collection)
    values = np.zeros((T, T))
    for i in range(T):
        for j in range(i + 1, T):
            try:
                d = task_distance(
                    collection[i], collection[j], metric_name, params, projection
                )
            except TaskCascadeError as exc:
                raise type(exc)(
                    f"pair ({collection[i].id!r}, {collection[j].id!r}): {exc}"
                ) from exc
            values[i, j] = values[j, i] = d
    return DistanceMatrix(values, metric_name, collection.ids)


def save_distance_matrix(matrix: DistanceMatrix, path) -> None:
    """Write a square CSV: header row of task ids, then row-major values."""
    with open(path, "w") as fh:
        fh.write(",".join(matrix.task_ids) + "\n")
        for row in matrix.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_distance_matrix(path, metric_name: str = "unknown") -> DistanceMatrix:
    """Read a matrix written by :func:`save_distance_matrix`."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header:
            raise ConfigError(f"empty distance matrix file {path}")
        ids = header.split(",")
        rows = [
            [float(cell) for cell in line.strip().split(",")]
            for line in fh
            if line.strip()
        ]
    values = np.array(rows, dtype=np.float64)
    if values.shape != (len(ids), len(ids)):
        raise ConfigError(
            f"{path}: expected a {len(ids)}x{len(ids)} matrix, got {values.shape}"
        )
    return DistanceMatrix(values, metric_name, ids)
