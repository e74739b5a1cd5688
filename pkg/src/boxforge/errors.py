"""Exception types shared across the toolkit.

Everything raised on bad user input derives from BoxforgeError so the CLI
can map it to exit code 1; plain OSError keeps meaning "I/O failure" (exit 2).
"""


class BoxforgeError(Exception):
    """Base class for all toolkit errors."""


class InvalidBoxError(BoxforgeError, ValueError):
    """A box violates its coordinate invariants."""


class LabelParseError(BoxforgeError, ValueError):
    """A label or detections file could not be parsed."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class LabelFormatError(BoxforgeError, ValueError):
    """Serialization refused because the output would be invalid."""


class DatasetError(BoxforgeError):
    """A dataset root cannot be indexed as requested."""


class DegenerateBoxError(BoxforgeError, ValueError):
    """A box collapsed to zero extent where a proper box is required."""


class EvaluationError(BoxforgeError, ValueError):
    """Detection metrics cannot be computed from the given inputs."""


class SplitError(BoxforgeError, ValueError):
    """A train/validation split is degenerate or ill-specified."""


class LedgerError(BoxforgeError):
    """The iteration ledger rejected an operation."""


class ReviewError(BoxforgeError):
    """A review-queue operation cannot be applied."""
