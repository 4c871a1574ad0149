"""scikit-learn style wrappers.

These take the usual ``(n_samples, n_features)`` predictors and
``(n_samples, n_outcomes)`` responses and transpose internally.
"""
import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .baselines import ols_univariate, svd_factor_baseline
from .factor import DEFAULT_LAMBDA_GRID, factor_scores, select_lambda
from .network import DEFAULT_THRESHOLD
from .numerics import sample_covariance
from .pipeline import run_coreg
from .regression import make_design

__all__ = ["CoReg", "OLSRegression", "SvdFactorRegression", "CoexpressionModules"]


def _design(X, fit_intercept):
    names = [f"x{i + 1}" for i in range(X.shape[1])]
    return make_design(X.T, names, intercept=fit_intercept)


class _LinearTestsMixin:
    """Shared prediction and attribute unpacking for the testing regressors."""

    def _check(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
        self._single_output = y.ndim == 1
        if self._single_output:
            y = y[:, np.newaxis]
        self.n_features_in_ = X.shape[1]
        return X, y

    def _unpack(self, inference):
        start = 1 if self.fit_intercept else 0
        self.inference_ = inference
        self.coef_ = inference.estimate[:, start:].copy()
        self.intercept_ = inference.estimate[:, 0].copy() if self.fit_intercept \
            else np.zeros(inference.estimate.shape[0])
        self.pvalues_ = inference.p_value[:, start:].copy()
        self.rejected_ = inference.rejected[:, start:].copy()
        self.dof_ = inference.dof
        if self._single_output:
            self.coef_ = self.coef_[0]
            self.intercept_ = float(self.intercept_[0])
            self.pvalues_ = self.pvalues_[0]
            self.rejected_ = self.rejected_[0]

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ np.asarray(self.coef_).T + self.intercept_


class CoReg(_LinearTestsMixin, RegressorMixin, BaseEstimator):
    """Multivariate regression with co-expression-module factor adjustment.

    Fits ordinary least squares, extracts dense modules from the residual
    correlation network, turns them into block factors and tests each
    coefficient in the factor-augmented model.

    Parameters
    ----------
    lambda_grid : sequence of float
        Candidate density penalties in (1, 2].
    alpha : float
        Benjamini-Hochberg level, applied per predictor.
    threshold : float
        Minimum density ratio for accepting a module.
    norm : {"spectral", "frobenius"}
        Norm of the covariance reconstruction error used to choose lambda.
    loadings : {"binary", "eigen"}
    fit_intercept : bool
    fallback : bool
        Return plain OLS tests when no module is found instead of raising.

    Attributes
    ----------
    coef_, intercept_, pvalues_, rejected_ : arrays
    gamma_ : ndarray (n_outputs, K)
    factors_ : ndarray (n_samples, K)
    modules_ : ModulePartition or None
    factor_model_ : FactorModel or None
    lambda_ : float or None
    fallback_ : bool
    """

    def __init__(self, lambda_grid=DEFAULT_LAMBDA_GRID, alpha=0.05,
                 threshold=DEFAULT_THRESHOLD, norm="spectral", loadings="binary",
                 fit_intercept=True, fallback=True):
        self.lambda_grid = lambda_grid
        self.alpha = alpha
        self.threshold = threshold
        self.norm = norm
        self.loadings = loadings
        self.fit_intercept = fit_intercept
        self.fallback = fallback

    def fit(self, X, y):
        X, y = self._check(X, y)
        design = _design(X, self.fit_intercept)
        res = run_coreg(y.T, design, self.lambda_grid, self.alpha, self.threshold, self.norm,
                        self.loadings, fallback=self.fallback)
        self._unpack(res.inference)
        self.result_ = res
        self.fallback_ = res.fallback
        self.factor_model_ = res.factor_model
        if res.fallback:
            self.modules_, self.lambda_ = None, None
            self.gamma_ = np.zeros((y.shape[1], 0))
            self.factors_ = np.zeros((X.shape[0], 0))
        else:
            self.modules_ = res.factor_model.partition
            self.lambda_ = res.factor_model.lambda_star
            self.gamma_ = res.fit.Gamma_hat
            self.factors_ = res.factor_model.F.T
        return self


class OLSRegression(_LinearTestsMixin, RegressorMixin, BaseEstimator):
    """Mass-univariate least squares with per-coefficient t tests and BH."""

    def __init__(self, alpha=0.05, fit_intercept=True):
        self.alpha = alpha
        self.fit_intercept = fit_intercept

    def fit(self, X, y):
        X, y = self._check(X, y)
        self._unpack(ols_univariate(y.T, _design(X, self.fit_intercept), self.alpha))
        return self


class SvdFactorRegression(_LinearTestsMixin, RegressorMixin, BaseEstimator):
    """Regression adjusted for the top ``n_factors`` residual SVD directions."""

    def __init__(self, n_factors=1, alpha=0.05, fit_intercept=True):
        self.n_factors = n_factors
        self.alpha = alpha
        self.fit_intercept = fit_intercept

    def fit(self, X, y):
        X, y = self._check(X, y)
        design = _design(X, self.fit_intercept)
        self._unpack(svd_factor_baseline(y.T, design, self.n_factors, self.alpha))
        return self


class CoexpressionModules(TransformerMixin, BaseEstimator):
    """Learn dense co-expression modules from residuals; transform to module scores.

    ``fit`` takes an ``(n_samples, n_variables)`` residual matrix (assumed
    centred). ``transform`` returns the ``(n_samples, K)`` factor scores.
    """

    def __init__(self, lambda_grid=DEFAULT_LAMBDA_GRID, threshold=DEFAULT_THRESHOLD,
                 norm="spectral", loadings="binary"):
        self.lambda_grid = lambda_grid
        self.threshold = threshold
        self.norm = norm
        self.loadings = loadings

    def fit(self, X, y=None):
        E = check_array(X).T
        self.n_features_in_ = E.shape[0]
        model, lam = select_lambda(self.lambda_grid, sample_covariance(E), E, self.threshold,
                                   self.norm, self.loadings)
        self.factor_model_ = model
        self.modules_ = model.partition
        self.lambda_ = lam
        self.loadings_ = model.loadings.L
        self.labels_ = np.asarray(model.partition.labels())
        return self

    def transform(self, X):
        check_is_fitted(self, "factor_model_")
        E = check_array(X)
        if E.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {E.shape[1]} variables, expected {self.n_features_in_}")
        return factor_scores(self.factor_model_.loadings, E.T).T
