"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
AdapterError (and subclasses) -> 4.
"""


class PlainsumError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(PlainsumError):
    """Invalid configuration, flags, or run setup."""


class DataError(PlainsumError):
    """Malformed or inconsistent input data (corpus, dataset, parses)."""


class AdapterError(PlainsumError):
    """Failure while talking to an external adapter or scorer."""


class TransportError(AdapterError):
    """Network/subprocess-level failure; safe to retry idempotently."""


class ProtocolError(AdapterError):
    """The remote side answered, but the payload violates the protocol."""

    def __init__(self, message: str, payload: str | None = None):
        if payload is not None:
            excerpt = payload if len(payload) <= 200 else payload[:200] + "..."
            message = f"{message} (payload: {excerpt!r})"
        super().__init__(message)
