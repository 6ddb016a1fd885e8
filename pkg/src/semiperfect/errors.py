from typing import Any, Optional


class SemiperfectError(Exception):
    """Base class for every error raised by the package."""


class InputError(SemiperfectError, ValueError):
    """Malformed or invalid input data."""


class ScalarParseError(InputError):
    """A scalar string could not be parsed."""


class FormatError(InputError):
    """A JSON document does not follow the expected schema."""


class BackendUnsupported(SemiperfectError):
    """The operation is not available for this backend or input shape."""


class NonUnit(SemiperfectError, ArithmeticError):
    """Inversion of a nonunit of the local base ring."""


class ResidueNotIdempotent(InputError):
    pass


class NotPrimitiveResidue(InputError):
    pass


class NotOrthogonalResidues(InputError):
    pass


class NotRowConvergent(InputError):
    pass


class NotSummable(SemiperfectError, ArithmeticError):
    """A formal sum has no closed form in the supported class."""


class NoConvergence(SemiperfectError, RuntimeError):
    """An iteration exceeded its proven step bound."""


class InvariantViolation(SemiperfectError, AssertionError):
    """A computed object failed its own post-condition check."""


class NonInvertibleSum(SemiperfectError):
    """The sum of a family is not invertible, so it cannot be orthogonalized."""

    def __init__(self, message: str, certificate: Optional[Any] = None):
        super().__init__(message)
        self.certificate = certificate
