"""Linear-regression loss, contractive gradient refinement, and ridge solves.

The refinement operator does full-batch gradient descent on the quadratic
loss L(theta) = 0.5 * ||X theta - y||^2. One step maps theta to
M theta + eta X^T y with M = I - eta X^T X; for eta in (0, 2/lambda_max)
the map is a contraction with rate ||M|| < 1 whenever X^T X is positive
definite, so errors decay geometrically in the step count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import DegenerateDesignError, DivergenceError, ShapeMismatchError

_DIVERGENCE_LIMIT = 1e12
_POWER_TOL = 1e-10
_POWER_MAX_ITER = 10_000


@dataclass
class ModelParams:
    """A parameter vector for one linear model."""

    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.ascontiguousarray(self.theta, dtype=np.float64)
        if self.theta.ndim != 1:
            raise ShapeMismatchError("theta must be a 1-d vector")
        if not np.isfinite(self.theta).all():
            raise DivergenceError("theta has non-finite entries")


def _gram(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeMismatchError("X must be a 2-d matrix")
    return X.T @ X


def _power_top_eig(S: np.ndarray, tol: float, max_iter: int) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Deterministic all-ones start; stops when the Rayleigh quotient changes
    by less than ``tol`` relatively.
    """
    d = S.shape[0]
    v = np.full(d, 1.0 / np.sqrt(d))
    lam = 0.0
    for _ in range(max_iter):
        w = S @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam_new = float(v @ (S @ v))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    return lam


def lambda_max(X: np.ndarray) -> float:
    """Largest eigenvalue of X^T X (power iteration on the Gram matrix)."""
    G = _gram(X)
    if not np.any(G):
        raise DegenerateDesignError("X^T X is the zero matrix")
    return _power_top_eig(G, _POWER_TOL, _POWER_MAX_ITER)


def default_step_size(X: np.ndarray) -> float:
    """Step size 1/lambda_max(X^T X), strictly inside the stable interval."""
    return 1.0 / lambda_max(X)


def contraction_rate(X: np.ndarray, eta: float) -> float:
    """Spectral norm of M = I - eta X^T X.

    Computed by power iteration on M @ M (symmetric PSD), so the result is
    independent of the sign pattern of M's eigenvalues.
    """
    G = _gram(X)
    M = np.eye(G.shape[0]) - eta * G
    top = _power_top_eig(M @ M, 1e-13, 2 * _POWER_MAX_ITER)
    return float(np.sqrt(max(top, 0.0)))


@dataclass
class ContractionProfile:
    """Per-task step size and contraction rate of the refinement operator."""

    eta: float
    lambda_max: float
    rho: float

    def __post_init__(self):
        if not 0.0 < self.eta < 2.0 / self.lambda_max:
            raise DegenerateDesignError(
                f"eta={self.eta} outside (0, {2.0 / self.lambda_max})"
            )
        if not self.rho < 1.0:
            raise DegenerateDesignError(f"rho={self.rho} is not a contraction")

    @classmethod
    def from_design(cls, X: np.ndarray, eta: float | None = None) -> "ContractionProfile":
        lam = lambda_max(X)
        if eta is None:
            eta = 1.0 / lam
        return cls(eta=eta, lambda_max=lam, rho=contraction_rate(X, eta))


def refine(
    theta0: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    b: int,
    eta: float,
) -> np.ndarray:
    """Run b full-batch gradient steps on the quadratic loss from theta0.

    b = 0 returns a copy of theta0. Raises DivergenceError if any parameter
    leaves [-1e12, 1e12] or turns non-finite (invalid step size).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    theta = np.array(theta0, dtype=np.float64, copy=True)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ShapeMismatchError(f"X {X.shape} and y {y.shape} do not agree")
    if theta.shape != (X.shape[1],):
        raise ShapeMismatchError(
            f"theta has shape {theta.shape}, expected ({X.shape[1]},)"
        )
    if b < 0:
        raise ValueError(f"budget must be nonnegative, got {b}")
    for _ in range(b):
        theta -= eta * (X.T @ (X @ theta - y))
        if not np.isfinite(theta).all() or np.max(np.abs(theta)) > _DIVERGENCE_LIMIT:
            raise DivergenceError(
                "refinement diverged; step size exceeds 2/lambda_max"
            )
    return theta


def ridge_solution(X: np.ndarray, y: np.ndarray, lam: float = 0.0) -> np.ndarray:
    """Solve (X^T X + lam I) theta = X^T y via a Cholesky factorization."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] != y.shape[0]:
        raise ShapeMismatchError(f"X {X.shape} and y {y.shape} do not agree")
    if lam < 0:
        raise ValueError(f"ridge penalty must be nonnegative, got {lam}")
    G = _gram(X) + lam * np.eye(X.shape[1])
    try:
        factor = cho_factor(G, lower=True)
    except LinAlgError:
        raise DegenerateDesignError(
            "X^T X + lam I is singular; increase lam or check the design"
        ) from None
    return cho_solve(factor, X.T @ y)


def default_ridge_lambda(X: np.ndarray) -> float:
    """Scale-aware ridge penalty 1e-3 * trace(X^T X) / d."""
    X = np.asarray(X, dtype=np.float64)
    return 1e-3 * float(np.sum(X * X)) / X.shape[1]


def rmse(theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    """Root mean squared residual of y against X theta."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] != y.shape[0]:
        raise ShapeMismatchError(f"X {X.shape} and y {y.shape} do not agree")
    if y.shape[0] == 0:
        raise ShapeMismatchError("rmse needs at least one sample")
    r = X @ np.asarray(theta, dtype=np.float64) - y
    return float(np.sqrt(np.mean(r * r)))
