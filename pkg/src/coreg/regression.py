"""Closed-form multivariate least squares (Step 1 of CoReg)."""
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .exceptions import DimensionError, InsufficientSamplesError, RankDeficiencyError
from .numerics import as_matrix, sample_covariance, to_correlation

__all__ = ["Design", "RegressionFit", "make_design", "gram_inverse", "solve_least_squares",
           "fit_ols", "residual_dependence"]

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class Design:
    """Predictor matrix ``X`` (q x n) plus labels.

    Use :func:`make_design` to build one; it prepends the intercept row.
    """

    X: np.ndarray
    predictor_names: tuple = ()
    has_intercept: bool = True

    def __post_init__(self):
        X = as_matrix(self.X, "X")
        object.__setattr__(self, "X", X)
        names = tuple(self.predictor_names) or tuple(f"x{i}" for i in range(X.shape[0]))
        if len(names) != X.shape[0]:
            raise DimensionError(f"{len(names)} predictor names for {X.shape[0]} predictor rows")
        object.__setattr__(self, "predictor_names", names)
        if self.has_intercept and not np.all(X[0] == 1.0):
            raise DimensionError("has_intercept is set but the first row of X is not all ones")

    @property
    def q(self):
        return self.X.shape[0]

    @property
    def n(self):
        return self.X.shape[1]


def make_design(predictors, names=None, intercept=True):
    """Build a :class:`Design` from a (q' x n) predictor array.

    ``predictors`` may be ``None`` (or have zero rows) for an intercept-only model.
    """
    if predictors is None:
        raise DimensionError("predictors=None needs an explicit sample count; pass np.empty((0, n))")
    P = np.asarray(predictors, dtype=float)
    if P.ndim == 1:
        P = P[np.newaxis, :]
    names = list(names) if names is not None else [f"x{i + 1}" for i in range(P.shape[0])]
    if intercept:
        P = np.vstack([np.ones((1, P.shape[1])), P])
        names = ["intercept"] + names
    return Design(P, tuple(names), has_intercept=intercept)


def gram_inverse(Z, names=None):
    """Return ``(Z Z^T)^{-1}`` via Cholesky, refusing ill-conditioned Gram matrices."""
    G = Z @ Z.T
    # The condition guard runs on the unit-diagonal rescaling so predictor units don't trip it.
    d = np.sqrt(np.diag(G))
    if np.any(d == 0):
        bad = int(np.flatnonzero(d == 0)[0])
        raise RankDeficiencyError(f"predictor {_label(names, bad)} is identically zero")
    Gs = G / d[:, None] / d[None, :]
    cond = np.linalg.cond(Gs)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise RankDeficiencyError(
            f"predictors are collinear (condition number {cond:.3g}); "
            f"suspect: {', '.join(_collinear(Gs, names))}"
        )
    c = linalg.cho_factor(G)
    inv = linalg.cho_solve(c, np.eye(G.shape[0]))
    return (inv + inv.T) / 2.0


def solve_least_squares(Y, Z, names=None):
    """Coefficients ``C`` minimising ``||Y - C Z||_F`` and the inverse Gram matrix."""
    inv = gram_inverse(Z, names)
    return Y @ Z.T @ inv, inv


def _label(names, i):
    return names[i] if names is not None and i < len(names) else f"#{i}"


def _collinear(Gs, names):
    w, V = np.linalg.eigh(Gs)
    v = np.abs(V[:, 0])
    idx = np.flatnonzero(v > 0.1 * v.max())
    return [_label(names, int(i)) for i in idx]


@dataclass
class RegressionFit:
    B_hat: np.ndarray
    residuals: np.ndarray
    dof: int
    xx_inv: np.ndarray = field(repr=False)

    def fitted(self, design):
        return self.B_hat @ design.X


def fit_ols(Y, design):
    """Least squares of every outcome row of ``Y`` (p x n) on ``design``."""
    Y = as_matrix(Y, "Y")
    X = design.X
    if Y.shape[1] != X.shape[1]:
        raise DimensionError(f"Y has {Y.shape[1]} samples, design has {X.shape[1]}")
    if X.shape[1] <= X.shape[0]:
        raise InsufficientSamplesError(f"n={X.shape[1]} must exceed q={X.shape[0]}")
    B, inv = solve_least_squares(Y, X, design.predictor_names)
    E = Y - B @ X
    return RegressionFit(B_hat=B, residuals=E, dof=X.shape[1] - X.shape[0], xx_inv=inv)


def residual_dependence(fit):
    """Covariance and correlation of the Step-1 residuals."""
    cov = sample_covariance(fit.residuals)
    return cov, to_correlation(cov)
