"""Exception taxonomy shared across the library.

Everything raised on purpose derives from :class:`IspError` so callers (and
the CLI) can fence library failures off from genuine bugs.
"""


class IspError(Exception):
    """Base class for all library errors."""


class InvalidParamsError(IspError, ValueError):
    """Pipeline parameters violate a documented invariant."""


class NonFiniteInputError(IspError, ValueError):
    """An input image contains NaN or +/-inf; carries the first offender."""

    def __init__(self, message: str, pixel=None):
        super().__init__(message)
        self.pixel = pixel


class ShapeMismatchError(IspError, ValueError):
    """Array shapes are inconsistent with each other or with the operation."""


class SingularMatrixError(IspError, ValueError):
    """A matrix that must be inverted is singular or near-singular."""


class SolveError(IspError, ArithmeticError):
    """A per-pixel linear solve failed; carries the flat pixel index."""

    def __init__(self, message: str, pixel=None):
        super().__init__(message)
        self.pixel = pixel


class FormatError(IspError, ValueError):
    """A serialized file does not conform to its documented layout."""


class ConsistencyError(IspError, ValueError):
    """Supplied inputs disagree with recomputed quantities (strict mode)."""


class MetricsError(IspError, ValueError):
    """A metric is undefined for the given inputs (e.g. no usable samples)."""
