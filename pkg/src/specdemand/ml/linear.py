"""OLS, ridge and lasso on internally standardised features."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInput, SingularSystem

# Reciprocal condition number below which the normal equations count as singular.
_RCOND = 1e-12


@dataclass
class LinearModel:
    """Linear model in standardised feature space.

    ``coefficients`` multiply z-scored features; ``means``/``stds`` are the
    training statistics (constant columns carry std 1 and coefficient 0).
    """

    coefficients: np.ndarray
    intercept: float
    means: np.ndarray
    stds: np.ndarray
    alpha: float = 0.0
    kind: str = "ridge"
    converged: bool = True
    n_iter: int = 0

    @property
    def n_features(self) -> int:
        return len(self.coefficients)

    @property
    def raw_coefficients(self) -> np.ndarray:
        """Coefficients on the original feature scale."""
        return self.coefficients / self.stds

    @property
    def raw_intercept(self) -> float:
        return float(self.intercept - np.dot(self.means, self.raw_coefficients))

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return ((X - self.means) / self.stds) @ self.coefficients + self.intercept

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "coefficients": self.coefficients.tolist(),
            "intercept": self.intercept,
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "alpha": self.alpha,
            "converged": self.converged,
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(np.asarray(d["coefficients"], dtype=float), float(d["intercept"]),
                   np.asarray(d["means"], dtype=float), np.asarray(d["stds"], dtype=float),
                   float(d.get("alpha", 0.0)), d.get("kind", "ridge"),
                   bool(d.get("converged", True)), int(d.get("n_iter", 0)))


@dataclass
class _Standardized:
    Z: np.ndarray
    yc: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    y_mean: float
    active: np.ndarray = field(default=None)


def _standardize(X, y) -> _Standardized:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise InvalidInput(f"shape mismatch: X {X.shape}, y {y.shape}")
    if X.shape[0] == 0:
        raise InvalidInput("no rows")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    active = stds > 1e-12 * np.maximum(1.0, np.abs(means))
    stds = np.where(active, stds, 1.0)
    Z = (X - means) / stds
    Z[:, ~active] = 0.0
    y_mean = float(y.mean())
    return _Standardized(Z, y - y_mean, means, stds, y_mean, active)


def fit_ridge(X, y, alpha: float = 0.1) -> LinearModel:
    """Ridge regression: solve ``(Z'Z + alpha n I) w = Z'(y - ybar)``.

    ``Z`` is the z-scored design; the intercept is unpenalised and equals
    the target mean.  ``alpha = 0`` is ordinary least squares.
    """
    if not alpha >= 0:
        raise InvalidInput(f"alpha must be >= 0, got {alpha}")
    s = _standardize(X, y)
    n, p = s.Z.shape
    coef = np.zeros(p)
    act = np.flatnonzero(s.active)
    if act.size:
        Za = s.Z[:, act]
        gram = Za.T @ Za
        if alpha == 0:
            if n < act.size + 1:
                raise SingularSystem(f"{n} rows cannot determine {act.size} coefficients + intercept")
            if 1.0 / np.linalg.cond(gram) < _RCOND:
                raise SingularSystem("normal equations are numerically singular")
        gram[np.diag_indices_from(gram)] += alpha * n
        coef[act] = np.linalg.solve(gram, Za.T @ s.yc)
    return LinearModel(coef, s.y_mean, s.means, s.stds, float(alpha),
                       "ols" if alpha == 0 else "ridge")


def fit_ols(X, y, ridge_fallback: bool = False) -> LinearModel:
    """Least squares with intercept.

    Raises :class:`SingularSystem` on rank-deficient designs unless
    ``ridge_fallback`` is set, in which case a tiny ridge penalty is used.
    """
    try:
        return fit_ridge(X, y, 0.0)
    except SingularSystem:
        if not ridge_fallback:
            raise
        return fit_ridge(X, y, 1e-8)


def soft_threshold(z: float, gamma: float) -> float:
    """``sign(z) * max(|z| - gamma, 0)``."""
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


def fit_lasso(X, y, alpha: float, max_iter: int = 1000, tol: float = 1e-6) -> LinearModel:
    """Lasso by cyclic coordinate descent on z-scored features.

    Minimises ``0.5 ||yc - Z w||^2 + alpha n ||w||_1``.  The update for
    coordinate ``j`` is ``S(rho_j, alpha n) / sum(z_j^2)``.  Non-convergence
    within ``max_iter`` sweeps is reported via ``converged=False``.
    """
    if not alpha > 0:
        raise InvalidInput(f"lasso alpha must be > 0, got {alpha}")
    s = _standardize(X, y)
    n, p = s.Z.shape
    Z = s.Z
    col_sq = (Z * Z).sum(axis=0)
    w = np.zeros(p)
    r = s.yc.copy()
    gamma = alpha * n
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        max_step = 0.0
        for j in range(p):
            if col_sq[j] == 0.0:
                continue
            zj = Z[:, j]
            rho = float(zj @ r) + col_sq[j] * w[j]
            new = soft_threshold(rho, gamma) / col_sq[j]
            step = new - w[j]
            if step != 0.0:
                r -= step * zj
                w[j] = new
                max_step = max(max_step, abs(step))
        if max_step < tol:
            converged = True
            break
    return LinearModel(w, s.y_mean, s.means, s.stds, float(alpha), "lasso", converged, it)
