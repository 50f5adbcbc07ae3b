"""Exception hierarchy shared across the package."""


class ExpSympError(Exception):
    """Base class for all library errors."""


class DomainError(ExpSympError, ArithmeticError):
    """A Hamiltonian (or one of its derivatives) left its domain.

    ``index`` is the phase-space coordinate being differentiated when the
    non-finite value appeared (momenta first, then positions), or ``None``
    when the failure is not tied to a coordinate.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConfigError(ExpSympError, ValueError):
    """Invalid method, weight or run configuration."""


class WeightsInfeasibleError(ConfigError):
    """Weights hit the measure-zero set where no symplectic matrix exists."""

    def __init__(self, message, component):
        super().__init__(message)
        self.component = component


class NonConvergenceError(ExpSympError, RuntimeError):
    """An implicit solve ran out of iterations."""

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class StepError(ExpSympError, RuntimeError):
    """A step failed inside a run; wraps the original error."""

    def __init__(self, step_index, cause):
        super().__init__(f"step {step_index} failed: {cause}")
        self.step_index = step_index
        self.cause = cause


class ReferenceUnreliableError(ExpSympError, RuntimeError):
    """Two reference integrations disagree beyond the allowed threshold."""

    def __init__(self, message, t_fail, disagreement):
        super().__init__(message)
        self.t_fail = t_fail
        self.disagreement = disagreement


class FitError(ExpSympError, ValueError):
    """Not enough usable samples for a growth-law fit."""
