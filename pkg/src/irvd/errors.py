class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


class NoSignalError(RuntimeError):
    """The received power never settles near the normalized peak."""


def check(cond, field, message, value=None):
    if not cond:
        suffix = "" if value is None else f" (got {value!r})"
        raise ConfigError(f"{field}: {message}{suffix}")
