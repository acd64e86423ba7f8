"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """Invalid or malformed configuration. Always names the offending key."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class MetricUndefinedError(ValueError):
    """A metric was requested on data that cannot define it (e.g. zero packets sent)."""


class UnservedZoneError(RuntimeError):
    """No candidate is available to serve a zone that needs an outside head."""


class ContractError(ValueError):
    """An operation was called in a way its contract forbids."""


class TraceFormatError(ValueError):
    """A trace file or record does not match the expected format."""
