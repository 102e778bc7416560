"""Exception hierarchy shared by all resq modules."""


class ResqError(Exception):
    """Base class for all errors raised by this package."""


class NonPhysicalError(ResqError):
    """Parameter combination implies zero or negative internal loss."""


class DegenerateDataError(ResqError):
    """Input points are collinear (or otherwise rank-deficient) within tolerance."""


class FitError(ResqError):
    """Base class for failures of an iterative fit."""


class DidNotConvergeError(FitError):
    """No optimizer start reached a converged solution."""


class InsufficientSpanError(FitError):
    """Photon-number points do not span enough decades for a TLS fit."""


class FixedPointDivergedError(FitError):
    """The photon-number self-consistency iteration failed to converge."""


class ParseError(ResqError):
    """A trace or manifest file is structurally malformed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ResqError):
    """A parsed file violates a content rule (finiteness, minimum size, ...)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyInputError(ResqError):
    """An aggregation was requested over an empty collection."""
