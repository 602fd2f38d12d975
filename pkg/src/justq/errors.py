"""Exception hierarchy for scenario validation, scheduling and config parsing."""


class JustQError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(JustQError, ValueError):
    """A scenario violates a type invariant.

    ``field`` names the offending input so callers can point at it.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateFlowId(ValidationError):
    pass


class NonPositiveWeight(ValidationError):
    pass


class NonPositiveCapacity(ValidationError):
    pass


class InvalidSpec(ValidationError):
    """A traffic generator spec has a non-positive or inconsistent parameter."""


class TimeRegression(JustQError, ValueError):
    pass


class FlowMismatch(JustQError, ValueError):
    pass


class UnknownFlow(JustQError, KeyError):
    pass


class AllZero(JustQError, ValueError):
    pass


class ZeroOracleShare(JustQError, ValueError):
    pass


class EmptyClass(JustQError, ValueError):
    pass


class ConfigError(JustQError):
    """Base for config-file errors; carries the 1-based line when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParseError(ConfigError):
    pass


class UnknownKey(ConfigError):
    def __init__(self, key, line=None):
        self.key = key
        super().__init__(f"unknown key {key!r}", line)


class MissingRequired(ConfigError):
    def __init__(self, key, line=None):
        self.key = key
        super().__init__(f"missing required key {key!r}", line)
