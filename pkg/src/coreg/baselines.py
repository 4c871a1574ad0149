"""Comparator methods sharing the CoReg result schema."""
import numpy as np

from .exceptions import InsufficientSamplesError
from .inference import coefficient_tests, fit_coreg, test_coefficients
from .numerics import as_matrix
from .regression import fit_ols

__all__ = ["ols_univariate", "svd_factors", "svd_factor_baseline"]


def ols_univariate(Y, design, alpha=0.05, outcome_labels=None):
    """Mass-univariate OLS: one regression per outcome, diagonal error model."""
    fit = fit_ols(Y, design)
    sigma2 = np.sum(fit.residuals ** 2, axis=1) / fit.dof
    return coefficient_tests(fit.B_hat, sigma2, fit.xx_inv, fit.dof, design, "OLS",
                             alpha, outcome_labels)


def svd_factors(E, n_factors):
    """Top right-singular directions of the residuals, as orthogonal factor rows."""
    if n_factors == 0:
        return np.zeros((0, E.shape[1]))
    _, _, Vt = np.linalg.svd(E, full_matrices=False)
    return Vt[:n_factors] * np.sqrt(E.shape[1])


def svd_factor_baseline(Y, design, n_factors, alpha=0.05, outcome_labels=None):
    """Orthogonal latent-factor adjustment (SVD of Step-1 residuals).

    A plain stand-in for surrogate-variable style adjustment; it is not the
    published SVA algorithm.
    """
    Y = as_matrix(Y, "Y")
    n_factors = int(n_factors)
    limit = min(Y.shape[0], Y.shape[1]) - design.q
    if n_factors < 0 or n_factors >= limit:
        raise InsufficientSamplesError(
            f"n_factors={n_factors} must be below min(p, n) - q = {limit}")
    if n_factors == 0:
        res = ols_univariate(Y, design, alpha, outcome_labels)
        res.method = "SvdFactor"
        return res
    E = fit_ols(Y, design).residuals
    fit = fit_coreg(Y, design, svd_factors(E, n_factors))
    return test_coefficients(fit, design, alpha, "SvdFactor", outcome_labels)
