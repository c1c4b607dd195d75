"""Exception hierarchy shared across the package."""


class TraderError(Exception):
    """Base class for everything this package raises on purpose."""


class InputError(TraderError, ValueError):
    """Caller handed us something invalid (empty, non-finite, out of range)."""


class ShapeError(TraderError, ValueError):
    """Array shapes are incompatible; message names the offending stage."""


class DataError(TraderError, ValueError):
    """A record violated its invariants; message carries row/field context."""


class ParseError(DataError):
    """A file could not be parsed; message carries the line number."""


class FeedError(TraderError, IOError):
    """Underlying feed I/O failed. Distinct from normal end-of-feed."""


class ConfigError(TraderError, ValueError):
    """Run configuration is malformed or inconsistent."""
