"""Exception types shared across the engine."""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(EngineError):
    """A record in an input file violates its schema.

    Carries the source path and 1-based line (or row) number when known.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix += str(path)
        if line is not None:
            prefix += f":{line}"
        if prefix:
            message = f"{prefix}: {message}"
        super().__init__(message)


class DataError(EngineError):
    """Input data is well-formed but semantically invalid."""


class ConfigError(EngineError):
    """Configuration is inconsistent with the data or with a cached artifact."""


class NotFoundError(EngineError):
    """A label lookup that must be total failed."""


class UnscorableClipError(EngineError):
    """A clip carries no frames and cannot be scored."""
