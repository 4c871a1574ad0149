"""Exception hierarchy.

CLI exit codes key off these: ``ConfigError`` subclasses map to 2, every other
``CoRegError`` maps to 3.
"""


class CoRegError(Exception):
    """Base class for all package errors."""


class ConfigError(CoRegError, ValueError):
    """Invalid user input, parameter or specification."""


class DimensionError(ConfigError):
    pass


class DegenerateVarianceError(CoRegError, ValueError):
    def __init__(self, index, value):
        self.index = index
        super().__init__(f"variable {index} has non-positive variance ({value!r})")


class DecompositionError(CoRegError):
    pass


class RankDeficiencyError(CoRegError):
    """Design (or design plus factors) is singular or badly conditioned."""


class InsufficientSamplesError(CoRegError):
    pass


class NoModulesError(CoRegError):
    """No module passed acceptance; callers fall back to mass-univariate OLS."""
