"""Exception hierarchy shared by all modules."""


class GmsfemError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(GmsfemError, ValueError):
    pass


class ParameterError(GmsfemError, ValueError):
    pass


class ContractError(GmsfemError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateInputError(GmsfemError, ValueError):
    pass


class RangeError(GmsfemError, IndexError):
    pass


class NumericError(GmsfemError, ArithmeticError):
    """A linear or eigen solve did not reach its accuracy target.

    ``residual`` carries the achieved relative residual when one is known.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
