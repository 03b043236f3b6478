"""Exception types shared across the package."""


class RecursiveMixingError(Exception):
    """Base class for all package errors."""


class DomainError(RecursiveMixingError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class DimensionMismatch(RecursiveMixingError, ValueError):
    pass


class NotPsd(RecursiveMixingError, ValueError):
    """Matrix is not positive semi-definite (a Cholesky pivot went negative)."""


class EmptySample(RecursiveMixingError, ValueError):
    pass


class TooFewSamples(RecursiveMixingError, ValueError):
    pass


class PoissonOverflow(RecursiveMixingError, FloatingPointError):
    """Poisson mean exceeded the overflow guard; the iterate has exploded."""


class SingularHessian(RecursiveMixingError, ArithmeticError):
    pass


class NoConvergence(RecursiveMixingError, ArithmeticError):
    pass


class ConfigError(RecursiveMixingError, ValueError):
    pass


class DataError(RecursiveMixingError, ValueError):
    pass


class MissingColumn(DataError):
    pass


class UnparseableRow(DataError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
