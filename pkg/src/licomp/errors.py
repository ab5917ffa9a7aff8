"""Exception hierarchy shared by every licomp module."""


class LicError(Exception):
    """Base class for all licomp failures."""


class DimensionError(LicError, ValueError):
    """Tensor or image shapes do not line up."""


class GraphError(LicError, RuntimeError):
    """Misuse of the autodiff tape (e.g. backward on a detached tensor)."""


class NumericError(LicError, FloatingPointError):
    """Non-finite loss or gradient; training diverged."""


class BitstreamError(LicError, ValueError):
    """Malformed, truncated or inconsistent compressed stream."""


class ImageFormatError(LicError, ValueError):
    """Unreadable image file."""


class ExternalToolError(LicError, RuntimeError):
    """An external codec binary is missing or failed."""

    def __init__(self, message, output=""):
        super().__init__(message if not output else f"{message}\n{output}")
        self.output = output
