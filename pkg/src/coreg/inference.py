"""Factor-augmented regression and coefficient-level inference (Step 3)."""
import csv
import io
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .exceptions import ConfigError, DimensionError, InsufficientSamplesError
from .numerics import as_matrix
from .regression import gram_inverse, solve_least_squares

__all__ = [
    "METHOD_TAGS",
    "CoRegFit",
    "InferenceResult",
    "fit_coreg",
    "test_coefficients",
    "coefficient_tests",
    "bh_adjust",
    "storey_pi0",
]

METHOD_TAGS = ("CoReg", "OLS", "SvdFactor")


@dataclass
class CoRegFit:
    B_hat: np.ndarray
    Gamma_hat: np.ndarray
    residuals_eps: np.ndarray
    dof: int
    sigma_eps_diag: np.ndarray
    F: np.ndarray = field(repr=False, default=None)

    @property
    def K(self):
        return self.Gamma_hat.shape[1]


def fit_coreg(Y, design, F):
    """Joint least squares of ``Y`` on ``[X; F]``.

    ``F`` (K x n) may have zero rows, which reduces to plain OLS.
    """
    Y = as_matrix(Y, "Y")
    X = design.X
    F = np.asarray(F, dtype=float).reshape(-1, X.shape[1])
    q, n = X.shape
    K = F.shape[0]
    if Y.shape[1] != n:
        raise DimensionError(f"Y has {Y.shape[1]} samples, design has {n}")
    dof = n - (q + K)
    if dof < 1:
        raise InsufficientSamplesError(f"n={n} leaves no residual degrees of freedom with q={q}, K={K}")
    Z = np.vstack([X, F])
    names = list(design.predictor_names) + [f"factor{k + 1}" for k in range(K)]
    C, _ = solve_least_squares(Y, Z, names)
    eps = Y - C @ Z
    return CoRegFit(
        B_hat=C[:, :q],
        Gamma_hat=C[:, q:],
        residuals_eps=eps,
        dof=dof,
        sigma_eps_diag=np.sum(eps ** 2, axis=1) / dof,
        F=F,
    )


def bh_adjust(p_values, alpha=0.05):
    """Benjamini-Hochberg step-up. Returns ``(adjusted_p, rejected)``."""
    p = np.asarray(p_values, dtype=float).reshape(-1)
    if not (0.0 < alpha < 1.0):
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    if p.size == 0:
        return p.copy(), np.zeros(0, dtype=bool)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ConfigError("p-values must lie in [0, 1]")
    adj = np.maximum(stats.false_discovery_control(p, method="bh"), p)
    # Flags come from the step-up rule itself, not from comparing adj to alpha,
    # so boundary cases do not depend on rounding in the adjustment.
    m = p.size
    sorted_p = np.sort(p)
    below = np.flatnonzero(sorted_p <= alpha * np.arange(1, m + 1) / m)
    rejected = p <= sorted_p[below[-1]] if below.size else np.zeros(m, dtype=bool)
    return adj, rejected


def storey_pi0(p_values, lambda0=0.5):
    """Storey's estimate of the proportion of true null hypotheses."""
    p = np.asarray(p_values, dtype=float).reshape(-1)
    m = p.size
    if m < 20:
        raise DimensionError(f"storey_pi0 needs at least 20 tests, got {m}")
    pi0 = np.count_nonzero(p > lambda0) / ((1.0 - lambda0) * m)
    return float(min(max(pi0, 0.0), 1.0))


@dataclass
class InferenceResult:
    """Per (outcome, predictor) tests. Arrays are p x q."""

    estimate: np.ndarray
    std_error: np.ndarray
    t_stat: np.ndarray
    p_value: np.ndarray
    adjusted_p: np.ndarray
    rejected: np.ndarray
    method: str
    alpha: float
    dof: int
    predictor_names: tuple
    outcome_labels: tuple
    degenerate: np.ndarray = None
    n_factors: int = 0

    def column(self, predictor):
        if isinstance(predictor, str):
            return self.predictor_names.index(predictor)
        return int(predictor)

    def rows(self):
        for l, label in enumerate(self.outcome_labels):
            for m, pred in enumerate(self.predictor_names):
                yield {
                    "outcome": label,
                    "predictor": pred,
                    "estimate": self.estimate[l, m],
                    "std_error": self.std_error[l, m],
                    "t_stat": self.t_stat[l, m],
                    "p_value": self.p_value[l, m],
                    "adjusted_p": self.adjusted_p[l, m],
                    "rejected": bool(self.rejected[l, m]),
                }

    def to_csv(self):
        buf = io.StringIO()
        cols = ["outcome", "predictor", "estimate", "std_error", "t_stat", "p_value",
                "adjusted_p", "rejected"]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in self.rows():
            w.writerow([_fmt(row[c]) for c in cols])
        return buf.getvalue()

    def summary(self):
        pi0 = {}
        for m, pred in enumerate(self.predictor_names):
            try:
                pi0[pred] = storey_pi0(self.p_value[:, m])
            except DimensionError:
                pi0[pred] = None
        return {
            "method": self.method,
            "alpha": self.alpha,
            "dof": self.dof,
            "n_factors": self.n_factors,
            "n_outcomes": len(self.outcome_labels),
            "rejections": {pred: int(self.rejected[:, m].sum())
                           for m, pred in enumerate(self.predictor_names)},
            "pi0": pi0,
            "degenerate_outcomes": int(np.count_nonzero(self.degenerate))
            if self.degenerate is not None else 0,
        }


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def coefficient_tests(B, sigma2, xx_inv, dof, design, method, alpha=0.05,
                      outcome_labels=None, n_factors=0):
    """t-tests for ``B`` given per-outcome residual variances and ``(X X^T)^{-1}``."""
    if method not in METHOD_TAGS:
        raise ConfigError(f"method tag must be one of {METHOD_TAGS}")
    if dof < 1:
        raise InsufficientSamplesError("no residual degrees of freedom")
    p, q = B.shape
    se = np.sqrt(np.outer(sigma2, np.diag(xx_inv)))
    degenerate = sigma2 <= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = B / se
        pv = 2.0 * stats.t.sf(np.abs(t), dof)
    if np.any(degenerate):
        warnings.warn(f"{int(degenerate.sum())} outcome(s) have zero residual variance; "
                      "their p-values are set to 0", RuntimeWarning, stacklevel=2)
        t[degenerate] = np.where(B[degenerate] == 0, 0.0, np.sign(B[degenerate]) * np.inf)
        pv[degenerate] = 0.0
    pv = np.clip(pv, 0.0, 1.0)
    adj = np.empty_like(pv)
    rej = np.empty(pv.shape, dtype=bool)
    for m in range(q):
        adj[:, m], rej[:, m] = bh_adjust(pv[:, m], alpha)
    labels = tuple(outcome_labels) if outcome_labels is not None else tuple(
        f"y{l + 1}" for l in range(p))
    return InferenceResult(B, se, t, pv, adj, rej, method, float(alpha), int(dof),
                           tuple(design.predictor_names), labels, degenerate, n_factors)


def test_coefficients(fit, design, alpha=0.05, method="CoReg", outcome_labels=None):
    """Two-sided t-tests of every ``B[l, m]`` with ``n - (q + K)`` degrees of freedom.

    The standard error uses ``[(X X^T)^{-1}]_mm``; ``X`` and the factors are
    orthogonal, so this equals the X-block of the augmented inverse Gram.
    """
    xx_inv = gram_inverse(design.X, design.predictor_names)
    return coefficient_tests(fit.B_hat, fit.sigma_eps_diag, xx_inv, fit.dof, design,
                             method, alpha, outcome_labels, fit.K)


test_coefficients.__test__ = False
