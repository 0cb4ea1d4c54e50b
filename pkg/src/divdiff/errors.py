"""Exception types raised by divdiff.

Every error the package raises derives from DivDiffError, so callers can
catch one base class.  The leaf classes also inherit the closest builtin
(ValueError, OverflowError, ...) so generic handlers keep working.
"""


class DivDiffError(Exception):
    """Base class for all divdiff errors."""


class InvalidInputError(DivDiffError, ValueError):
    """An argument is non-finite or otherwise outside the documented range."""


class DomainError(DivDiffError, ValueError):
    """An operation was evaluated outside its mathematical domain.

    Domain checks cover both endpoints of the difference: the base point and
    the stepped point must both be valid (and must not straddle a pole).
    """


class ComputeOverflowError(DivDiffError, OverflowError):
    """A result left the finite floating-point range."""


class ShapeError(DivDiffError, ValueError):
    """Vector/matrix dimensions do not agree."""


class SingularMatrixError(DivDiffError, ArithmeticError):
    """A linear solve hit a singular matrix at either endpoint."""


class ConvergenceError(DivDiffError, ArithmeticError):
    """An iterative numerical procedure failed to converge or diverged."""


class DegenerateModelError(DivDiffError, ZeroDivisionError):
    """A ratio test was asked to divide by a zero model decrease."""


class WindowStateError(DivDiffError, ValueError):
    """A stagnation window does not hold enough iterates for the query."""


class SplineValidationError(DivDiffError, ValueError):
    """A piecewise-cubic definition violates its consistency requirements."""


class FileFormatError(DivDiffError, ValueError):
    """An input file does not match the documented text format."""


class ParseError(DivDiffError, ValueError):
    """Expression text could not be parsed.

    The byte offset of the failure is carried in ``offset``.
    """

    def __init__(self, message, offset=None):
        super().__init__(message if offset is None
                         else f"{message} (at offset {offset})")
        self.offset = offset


class UnsupportedFunctionError(ParseError):
    """A function name outside the supported set was used."""
