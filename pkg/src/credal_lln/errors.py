"""Exception types shared across the package."""


class CredalError(Exception):
    """Base class for every error raised by credal_lln."""


class InputError(CredalError, ValueError):
    """Arguments violate an operation's preconditions."""


class CapacityError(CredalError):
    """An exhaustive enumeration would exceed its configured cap."""


class UndefinedConditioningError(CredalError):
    """Conditioning on an event with upper probability zero."""


class PolicyViolationError(CredalError):
    """The conditioning policy refuses the event (lower probability zero)."""


class StrategyViolationError(CredalError):
    """A strategy emitted a distribution outside its step constraint."""

    def __init__(self, message, step=None, history=None):
        super().__init__(message)
        self.step = step
        self.history = history
