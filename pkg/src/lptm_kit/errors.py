"""Exception types shared across the package."""


class LengthError(ValueError):
    """A sequence is shorter than the operation requires."""


class DomainError(ValueError):
    """An argument falls outside its documented domain."""


class ConfigError(ValueError):
    """A configuration file or override is malformed or unknown."""


class ParseError(ValueError):
    """An input file could not be parsed.

    Carries the offending line number when known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CorpusError(ValueError):
    """A corpus manifest or its referenced data is inconsistent."""


class ChecksumError(IOError):
    """A checkpoint failed its integrity check."""
