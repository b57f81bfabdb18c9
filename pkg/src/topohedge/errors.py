"""Exception types raised across the package."""


class TopoHedgeError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(TopoHedgeError, ValueError):
    pass


class EmptyInputError(TopoHedgeError, ValueError):
    pass


class ShapeError(TopoHedgeError, ValueError):
    pass


class ConfigurationError(TopoHedgeError, ValueError):
    pass


class DegenerateBatchError(TopoHedgeError, ValueError):
    pass


class NumericError(TopoHedgeError, ArithmeticError):
    """Non-finite value where a finite one is required."""


class NumericDivergenceError(NumericError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, step: int, what: str = "loss"):
        self.step = step
        super().__init__(f"non-finite {what} at training step {step}")
