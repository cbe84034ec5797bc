class ClfreeError(Exception):
    """Base class for all package errors."""


class DomainError(ClfreeError, ValueError):
    pass


class ConstraintViolation(ClfreeError, ValueError):
    """A parameter inequality does not hold; the message names it."""


class ProcessTerminated(ClfreeError):
    """No open pair is left to draw."""


class InfeasibleConfiguration(ClfreeError):
    pass


class ConsistencyError(ClfreeError):
    pass


class MissingSeriesError(ClfreeError, KeyError):
    pass
