"""Exception hierarchy shared by every masked_regression module."""


class MaskedRegressionError(ValueError):
    """Base class. Subclasses ValueError so callers validating input keep working."""


class InvalidInputError(MaskedRegressionError):
    """Arguments outside an operation's precondition."""


class SingularityError(MaskedRegressionError):
    """A matrix or pivot that must be inverted is (numerically) singular."""


class RegimeError(MaskedRegressionError):
    """Parameters fall outside the regime in which a construction is defined."""


class BudgetExceededError(MaskedRegressionError):
    """An adversary modified more than floor(eta * n) entries of some column."""
