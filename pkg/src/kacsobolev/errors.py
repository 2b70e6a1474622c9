"""Exception hierarchy shared by the numerical modules and the CLI."""


class KacError(Exception):
    """Base class for all package errors."""


class ConfigError(KacError, ValueError):
    """Invalid experiment configuration or parameter out of its domain."""


class DomainError(KacError, ValueError):
    """Argument outside the domain of a formula."""


class MassError(DomainError):
    """Norm requested for a measure whose total mass is not zero."""


class NumericError(KacError, ArithmeticError):
    """Quadrature did not converge or two independent routes disagree."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class InvariantViolation(KacError, RuntimeError):
    """A conserved quantity or positivity constraint was broken."""
