"""CoReg: multivariate regression with co-expression network dependence modeling."""
__version__ = "0.1.0"

from .estimators import CoReg, CoexpressionModules, OLSRegression, SvdFactorRegression
from .pipeline import run_coreg

__all__ = ["CoReg", "CoexpressionModules", "OLSRegression", "SvdFactorRegression", "run_coreg"]
