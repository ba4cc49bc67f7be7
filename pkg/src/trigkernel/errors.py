"""Exception hierarchy shared by every module."""


class TrigKernelError(Exception):
    """Base class for all package errors."""


class InputError(TrigKernelError, ValueError):
    """Arguments violate a documented precondition."""


class NumericalError(TrigKernelError, ArithmeticError):
    """A factorization or quadrature failed to reach the required accuracy."""


class ParseError(InputError):
    """A data or configuration file could not be parsed."""
