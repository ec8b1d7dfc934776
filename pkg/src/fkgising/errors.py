"""Exception types shared across the package."""


class CapExceeded(RuntimeError):
    """A size precondition (enumeration cap, quadrature dimension cap) was violated."""


class NumericError(RuntimeError):
    """A non-finite value appeared where a finite one is required."""


class ConfigError(ValueError):
    """A run configuration is malformed; the message names the offending key."""
