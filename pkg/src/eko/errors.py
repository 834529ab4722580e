"""Exception hierarchy shared across the engine."""


class EkoError(Exception):
    """Base class for every error raised by this package."""


class InputError(EkoError, ValueError):
    """Invalid argument or violated precondition."""


class FormatError(EkoError, ValueError):
    """Malformed, truncated or otherwise unreadable on-disk artifact."""


class CorruptionError(FormatError):
    """A stored payload failed its integrity check."""


class UnknownFrameError(EkoError, KeyError):
    """A requested frame id is not present in the store."""
