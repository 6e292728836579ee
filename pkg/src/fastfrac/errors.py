"""Exception types shared across the package."""


class FastFracError(Exception):
    """Base class for all package errors."""


class DomainError(FastFracError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class ConfigurationError(FastFracError, ValueError):
    """A configuration value is invalid or inconsistent with the requested run."""


class QuadratureFailure(FastFracError, RuntimeError):
    """A quadrature did not converge within its panel budget.

    Carries the estimated residual of the last refinement step.
    """

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class SingularityError(DomainError):
    """Evaluation requested at a non-integrable singularity (e.g. kernel at r=0)."""


class UnsupportedFormError(ConfigurationError):
    """The requested assembly form is not available for these parameters."""


class OperatorInconsistencyError(FastFracError, RuntimeError):
    """An internal consistency check on an assembled operator failed."""


class StepRejectedError(FastFracError, RuntimeError):
    """A nonlinear solve inside a time step did not converge; the step must shrink."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class SolverStallError(FastFracError, RuntimeError):
    """Repeated step rejections drove the time step below its floor."""


class InapplicableRegimeError(FastFracError, ValueError):
    """The requested estimate does not apply at these (N, s, m, p)."""


class FitFailureError(FastFracError, RuntimeError):
    """A fitted law could not be extracted from the data (e.g. non-monotone tail)."""


class UndefinedQuotientError(DomainError):
    """A quotient functional was requested for an identically-zero field."""
