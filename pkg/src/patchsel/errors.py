"""Exception types raised by the model code.

Every domain error derives from :class:`ModelError`; the CLI maps these to
exit code 1 and prints the class name on standard error.
"""


class ModelError(Exception):
    """Base class for domain errors."""


class DimensionMismatch(ModelError, ValueError):
    pass


class NonPositiveKappa(ModelError, ValueError):
    pass


class NotPositiveSemidefinite(ModelError, ValueError):
    def __init__(self, min_eigenvalue: float):
        self.min_eigenvalue = float(min_eigenvalue)
        super().__init__(f"covariance has negative eigenvalue {self.min_eigenvalue:.6g}")


class InvalidStrategy(ModelError, ValueError):
    pass


class NoUniqueStationary(ModelError, ValueError):
    def __init__(self, rank_deficiency: int):
        self.rank_deficiency = int(rank_deficiency)
        super().__init__(f"rate matrix is reducible (rank deficiency {self.rank_deficiency})")


class NoStationaryDistribution(ModelError, ValueError):
    pass


class DegenerateNoise(ModelError, ValueError):
    pass


class DegenerateStrategy(ModelError, ValueError):
    pass


class InvalidConfig(ModelError, ValueError):
    pass


class NonPositiveInitial(ModelError, ValueError):
    pass


class UnstableStep(ModelError, FloatingPointError):
    pass


class BurnInTooLong(ModelError, ValueError):
    pass


class StepTooLarge(ModelError, ValueError):
    pass


class IndexOutOfRange(ModelError, IndexError):
    pass


class NonpersistentStrategy(ModelError, ValueError):
    pass


class SigmaNotPositiveDefinite(ModelError, ValueError):
    pass


class NoPersistentStrategy(ModelError, ValueError):
    pass


class NoViablePatch(ModelError, ValueError):
    pass


class ParseError(ModelError, ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
