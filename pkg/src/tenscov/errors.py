"""Exception hierarchy shared by all modules.

The CLI maps these onto process exit codes: configuration problems exit with
2, numerical failures with 3 and infeasible sizes with 4.
"""


class TenscovError(Exception):
    """Base class for every error raised by the library."""

    exit_code = 1


class ParameterError(TenscovError, ValueError):
    """A parameter lies outside its admissible domain."""

    exit_code = 2


class KernelRangeError(ParameterError):
    """Kernel evaluation requested outside the supported accuracy range."""


class SingularityError(ParameterError):
    """A singular kernel was evaluated at its singular point."""


class UnsupportedRepresentation(ParameterError):
    """No exact integral representation exists for the requested kernel."""


class ShapeError(ParameterError):
    """Operands have incompatible shapes."""


class RankError(ParameterError):
    """A requested rank is larger than the data allows."""


class GridError(ParameterError):
    """Inconsistent grid or grid sequence."""


class SymmetryError(ParameterError):
    """Input lacks the symmetry an operation relies on."""


class BoundsError(TenscovError, IndexError):
    """Index outside of an axis."""

    exit_code = 2


class SizeError(TenscovError):
    """The dense object would exceed the feasibility guard."""

    exit_code = 4


class NumericalError(TenscovError):
    """Base for numerical failures."""

    exit_code = 3


class FactorizationError(NumericalError):
    """A per-axis factorization failed."""

    def __init__(self, message, axis=None):
        super().__init__(message)
        self.axis = axis


class NonConvergenceError(NumericalError):
    """An iteration hit its cap before reaching the tolerance.

    ``best`` holds the best iterate found and ``residual`` its relative
    residual.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class DivergenceError(NumericalError):
    """A series precondition is violated; ``norms`` holds the measurements."""

    def __init__(self, message, norms=None):
        super().__init__(message)
        self.norms = norms
