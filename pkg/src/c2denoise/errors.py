"""Exception hierarchy shared by the whole package.

The CLI maps each class onto a machine-greppable stderr prefix
(E_SHAPE, E_FORMAT, E_NUMERIC, E_CONFIG).
"""


class C2DenoiseError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(C2DenoiseError):
    """Array dimensions are inconsistent with the requested operation."""


class FormatError(C2DenoiseError):
    """A file or byte stream does not follow its declared format."""


class BadMagicError(FormatError):
    """The leading magic bytes of a file are wrong."""


class VersionError(FormatError):
    """The file's format version is not supported."""


class TruncatedError(FormatError):
    """The file ends before the declared payload is complete."""


class NumericError(C2DenoiseError):
    """Degenerate numeric input (zero variance, non-positive mean, ...)."""


class ConfigError(C2DenoiseError):
    """Invalid run configuration (unknown key, bad value, bad schema)."""
