"""Exception types shared across the package."""


class DimensionMismatchError(ValueError):
    """Operands have incompatible dimensions."""


class EvaluationOverflowError(ArithmeticError):
    """A loss evaluation produced a non-finite intermediate."""

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


class InvalidParameterError(ValueError):
    """A hyperparameter or argument is outside its admissible range."""


class DivergenceError(RuntimeError):
    """An update produced a non-finite state.

    Carries the last finite state and, when known, the iteration index.
    """

    def __init__(self, message, last_state=None, iteration=None):
        super().__init__(message)
        self.last_state = last_state
        self.iteration = iteration


class NoConvergenceError(RuntimeError):
    """An iterative solve did not converge within its iteration cap."""


class UnknownOptimumError(ValueError):
    """An operation needs a minimizer that is neither known nor resolvable."""


class PreconditionError(ValueError):
    """An operation's precondition on its input data is violated."""


class ConfigError(ValueError):
    """An experiment configuration is malformed."""
