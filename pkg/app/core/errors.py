"""Error hierarchy shared by the synthesis engines and the command line."""

from __future__ import annotations


class ShiftKrausError(ValueError):
    """Represents a failure with a machine-friendly code and exit status.

    ``code`` is always the class name so messages can be matched by scripts,
    and ``residual`` carries the measured violation when one exists.
    """

    exit_code = 2

    def __init__(self, message: str | None = None, *, residual: float | None = None):
        self.code = type(self).__name__
        self.residual = residual
        self.detail = message or self.code
        text = f"{self.code}: {self.detail}"
        if residual is not None:
            text = f"{text} (residual {residual:.3e})"
        super().__init__(text)


class ValidationError(ShiftKrausError):
    """Input failed a structural or physical invariant."""


class InvalidInput(ValidationError):
    pass


class SchemaError(ValidationError):
    """A JSON document does not follow its schema."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ZeroVector(ValidationError):
    pass


class NotNormalized(ValidationError):
    pass


class NotHermitian(ValidationError):
    pass


class NotPositive(ValidationError):
    pass


class TraceNotOne(ValidationError):
    pass


class NotUnitary(ValidationError):
    pass


class BadWeights(ValidationError):
    pass


class NotTracePreserving(ValidationError):
    pass


class KrausOnState(ValidationError):
    pass


class NotInvertible(ValidationError):
    pass


class ShiftLeak(ValidationError):
    pass


class ResourceError(ShiftKrausError):
    """A configured resource cap was hit."""

    exit_code = 4


class WindowOverflow(ResourceError):
    pass


class BudgetExceeded(ResourceError):
    pass


class ToleranceUnmet(ShiftKrausError):
    """Synthesis finished but the achieved error is above the requested one."""

    exit_code = 3


__all__ = [
    "BadWeights",
    "BudgetExceeded",
    "InvalidInput",
    "KrausOnState",
    "NotHermitian",
    "NotInvertible",
    "NotNormalized",
    "NotPositive",
    "NotTracePreserving",
    "NotUnitary",
    "ResourceError",
    "SchemaError",
    "ShiftKrausError",
    "ShiftLeak",
    "ToleranceUnmet",
    "TraceNotOne",
    "ValidationError",
    "WindowOverflow",
    "ZeroVector",
]
