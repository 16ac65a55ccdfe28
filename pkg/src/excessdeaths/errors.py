"""Exception types shared across the package."""


class ExcessDeathsError(Exception):
    """Base class for all errors raised by this package."""


class IngestError(ExcessDeathsError):
    """An input file could not be parsed or validated."""

    def __init__(self, message, path=None, line=None):
        loc = str(path) if path is not None else ""
        if line is not None:
            loc += f":{line}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line


class AlignmentError(ExcessDeathsError, ValueError):
    """Two dated series do not cover identical date ranges."""


class DomainError(ExcessDeathsError, ValueError):
    """A value lies outside the mathematically valid domain."""


class FitError(ExcessDeathsError, RuntimeError):
    """An iterative fit failed; ``trace`` holds the iteration history."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class ConfigError(ExcessDeathsError, ValueError):
    """A configuration file or option combination is malformed."""
