"""End-to-end CoReg on variables x samples arrays."""
import warnings
from dataclasses import dataclass

from .baselines import ols_univariate
from .exceptions import NoModulesError
from .factor import DEFAULT_LAMBDA_GRID, select_lambda
from .inference import fit_coreg, test_coefficients
from .network import DEFAULT_THRESHOLD
from .regression import fit_ols, residual_dependence

__all__ = ["CoRegResult", "run_coreg"]


@dataclass
class CoRegResult:
    inference: object
    step1: object
    factor_model: object = None
    fit: object = None
    residual_cov: object = None
    residual_corr: object = None
    fallback: bool = False

    @property
    def K(self):
        return 0 if self.factor_model is None else self.factor_model.K


def run_coreg(Y, design, lambda_grid=DEFAULT_LAMBDA_GRID, alpha=0.05,
              threshold=DEFAULT_THRESHOLD, norm="spectral", loadings="binary",
              outcome_labels=None, fallback=True):
    """Steps 1-3: OLS residuals, module-guided factors, factor-augmented tests.

    When no module survives extraction and ``fallback`` is true, the OLS
    inference is returned (tagged ``CoReg`` with ``fallback=True``).
    """
    step1 = fit_ols(Y, design)
    cov, corr = residual_dependence(step1)
    try:
        model, _ = select_lambda(lambda_grid, cov, step1.residuals, threshold, norm, loadings,
                                 max_factors=design.n - design.q - 1)
    except NoModulesError:
        if not fallback:
            raise
        warnings.warn("no co-expression modules found; using mass-univariate OLS",
                      RuntimeWarning, stacklevel=2)
        res = ols_univariate(Y, design, alpha, outcome_labels)
        res.method = "CoReg"
        return CoRegResult(res, step1, residual_cov=cov, residual_corr=corr, fallback=True)
    fit = fit_coreg(Y, design, model.F)
    res = test_coefficients(fit, design, alpha, "CoReg", outcome_labels)
    return CoRegResult(res, step1, model, fit, cov, corr)
