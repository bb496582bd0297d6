class ContractError(ValueError):
    """Raised when a caller violates a shape or precondition contract."""


class NumericFault(ArithmeticError):
    """Raised when a computation produces a non-finite value."""


class InsufficientExperience(RuntimeError):
    """The replay buffer holds fewer transitions than the requested batch."""


class EnvironmentFault(RuntimeError):
    """An environment step raised; the message carries episode and step."""
