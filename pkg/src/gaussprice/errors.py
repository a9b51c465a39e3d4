"""Exception hierarchy.

Every error carries a short machine-readable ``code`` (the class name) so the
CLI can print one parseable line per failure.
"""


class GausspriceError(Exception):
    """Base class for all domain errors raised by this package."""

    @property
    def code(self) -> str:
        return type(self).__name__


class NotPositiveDefinite(GausspriceError, ValueError):
    pass


class NotSymmetric(GausspriceError, ValueError):
    pass


class DimensionMismatch(GausspriceError, ValueError):
    pass


class InvalidParameter(GausspriceError, ValueError):
    pass


class DerivativeUnavailable(GausspriceError, LookupError):
    """The catalog does not carry the requested distributional derivative."""


class NodeBudgetExceeded(GausspriceError, ValueError):
    pass


class AtomsNotSampleable(GausspriceError, ValueError):
    pass


class OrderTooLarge(GausspriceError, ValueError):
    pass


class StencilLeavesPDCone(GausspriceError, ValueError):
    pass


class ParseError(GausspriceError, ValueError):
    """Malformed user input; ``position`` is a 0-based character offset."""

    def __init__(self, message: str, text: str = "", position: int | None = None):
        self.text = text
        self.position = position
        if position is not None:
            message = f"{message} at position {position}"
            if text:
                message += f" in {text!r}"
        super().__init__(message)
