"""Exception hierarchy.

Input errors map to CLI exit code 2, numerical errors to exit code 3.
"""


class TmgPanelError(Exception):
    """Base class for all package errors."""


class PanelInputError(TmgPanelError):
    """Malformed or inconsistent input data."""


class UnbalancedPanelError(PanelInputError):
    """A unit is missing one or more time periods."""


class DuplicateCellError(PanelInputError):
    """The same (unit, time) cell appears more than once."""


class NonFiniteValueError(PanelInputError):
    """NaN or infinite value in outcomes or regressors."""


class TooFewPeriodsError(PanelInputError):
    """T < k' + 1, so per-unit designs cannot have full column rank."""


class ScenarioError(PanelInputError):
    """Invalid simulation scenario configuration."""


class NumericalError(TmgPanelError):
    """Estimation failed for numerical reasons."""


class SingularDesignError(NumericalError):
    """Per-unit Gram matrix is singular (determinant at or below the noise floor)."""

    def __init__(self, units=None, message=None):
        self.units = list(units) if units is not None else []
        if message is None:
            message = "singular unit design"
            if self.units:
                message += f" for units {self.units[:10]}"
                if len(self.units) > 10:
                    message += f" (+{len(self.units) - 10} more)"
        super().__init__(message)


class AllSingularError(NumericalError):
    """Every unit determinant is zero; no threshold can be formed."""


class AllTrimmedError(NumericalError):
    """Every unit was trimmed; the estimator is undefined."""


class SingularPooledGramError(NumericalError):
    """Pooled regressor Gram matrix is singular."""


class SingularUnitGramError(NumericalError):
    """A per-unit X'MX matrix needed at full rank is singular."""


class RequiresTGreaterKError(NumericalError):
    """Operation needs T > k; the cross-section projector average is singular at T = k."""


class SingularMbarError(NumericalError):
    """Average annihilator matrix is not invertible."""


class SingularTeSystemError(NumericalError):
    """The T = k time-effects system matrix is not invertible."""


class SingularVdeltaError(NumericalError):
    """Hausman difference covariance is rank deficient."""
