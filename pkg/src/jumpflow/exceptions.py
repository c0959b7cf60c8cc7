"""Exception types raised by the library."""


class InvalidParameterError(ValueError):
    """A parameter lies outside its admissible range."""


class PreconditionError(ValueError):
    """An operation was called on a model that does not meet its hypotheses."""


class ContractViolationError(ValueError):
    """Inputs break a structural contract (e.g. non-nested noise windows)."""


class NonconvergenceError(RuntimeError):
    """An iteration exhausted its budget.

    The last residual is kept on ``residual`` so callers can decide whether
    to refine the step or raise the budget.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class ContractionError(NonconvergenceError):
    """The Picard map failed to contract in the weighted ensemble norm."""
