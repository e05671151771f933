class QMemCapError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class DomainError(QMemCapError, ValueError):
    exit_code = 3


class ConstraintError(DomainError):
    """Parameters that would make the channel not completely positive."""


class UndefinedRatioError(DomainError):
    """Ratio parameters requested for a zero decoherence magnitude."""


class NumericalError(QMemCapError, ArithmeticError):
    exit_code = 4
