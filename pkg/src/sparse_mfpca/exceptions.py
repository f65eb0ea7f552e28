"""Exception hierarchy used across the package."""


class FPCAError(Exception):
    """Base class for all errors raised by this package."""


class NumericalError(FPCAError):
    """A numerical procedure could not produce a usable result."""


class IllConditionedBasisError(NumericalError, ValueError):
    """The basis Gram matrix is (numerically) singular."""


class RankDeficiencyError(NumericalError):
    """Gram-Schmidt met a column with (numerically) zero residual norm.

    Attributes
    ----------
    column : int
        Zero-based index of the offending column.
    norm : float
        Weighted norm of the column after projection.
    """

    def __init__(self, column, norm):
        self.column = column
        self.norm = norm
        super().__init__(
            f"column {column} is linearly dependent on the preceding columns "
            f"(residual weighted norm {norm:.3e})"
        )


class DomainError(FPCAError, ValueError):
    """An evaluation point lies outside the function's domain."""


class InsufficientDataError(FPCAError, ValueError):
    """Too few observations to estimate the requested quantity."""


class MissingModelError(FPCAError, KeyError):
    """A variable has no fitted model attached."""


class AlignmentError(FPCAError, ValueError):
    """Score matrices or datasets do not share the same subjects."""


class OptimizerStalledError(NumericalError):
    """The line search could not find an acceptable step.

    The best iterate seen so far is kept in ``best`` (an ``OptimizeResult``)
    so callers can decide whether to accept it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DivergedError(NumericalError):
    """The objective became non-finite."""


class SelectionError(FPCAError):
    """Every candidate fit in a model-selection grid failed."""

    def __init__(self, failures):
        self.failures = dict(failures)
        lines = [f"  (U={u}, M={m}): {err}" for (u, m), err in self.failures.items()]
        super().__init__("all candidate fits failed:\n" + "\n".join(lines))


class BenchmarkFailedError(FPCAError):
    """Too many benchmark replicates failed."""

    def __init__(self, message, failures):
        super().__init__(message)
        self.failures = list(failures)


class DataFormatError(FPCAError, ValueError):
    """Input file is malformed."""
