class ConfGenError(Exception):
    pass


class ValidationError(ConfGenError, ValueError):
    """Inputs or a configuration break a stated rule."""


class ConfigurationError(ValidationError):
    """A spec is missing something an operation needs (e.g. ``a_max``)."""


class StreamingUnsupported(ConfGenError):
    """The selector needs the whole sequence and cannot stop early."""

    code = "STREAMING_UNSUPPORTED"
