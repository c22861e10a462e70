"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class ContractError(ValueError):
    """Caller violated a precondition (shape mismatch, infeasible input, ...)."""


class NumericalError(ArithmeticError):
    """A quadrature, factorization or optimizer failed to converge."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class UndefinedAREError(ZeroDivisionError):
    """The reference detector of an ARE has a zero error exponent."""


class ResourceLimitError(RuntimeError):
    """Requested problem size exceeds a configured cap."""
