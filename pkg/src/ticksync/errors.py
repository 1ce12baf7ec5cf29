"""Exception types shared across the package."""


class TickSyncError(Exception):
    """Base class for all ticksync errors."""


class PanelError(TickSyncError):
    """Invalid panel data (bad ticks, missing anchors, mask violations)."""


class ParseError(TickSyncError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LinearSystemError(TickSyncError):
    """Duration system cannot be built or applied."""


class ConfigError(TickSyncError):
    """Invalid solver / experiment configuration."""
