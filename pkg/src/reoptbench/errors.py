"""Exception hierarchy for reoptbench.

Every error carries the CLI exit code it maps to: 2 for domain errors
(recipe, protocol, scoring, structure) and 3 for I/O errors.
"""

from pathlib import Path
from typing import List, Optional, Sequence


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN = 2
EXIT_IO = 3


class ReoptBenchError(Exception):
    """Base class for all reoptbench errors."""
    exit_code: int = EXIT_DOMAIN


class StructuralError(ReoptBenchError):
    """Dimensions or structure of two objects do not match."""


class InvalidInputError(ReoptBenchError):
    """Input values are outside the accepted domain (NaN, bad parameters)."""


class ContractViolation(ReoptBenchError):
    """A variation touches components outside its mask."""


class MpsParseError(ReoptBenchError):
    """Positioned MPS parse error."""

    def __init__(self, line: int, column: int, message: str):
        self.line = line
        self.column = column
        self.message = message
        super().__init__(f"line {line}, column {column}: {message}")


class MpsWriteError(ReoptBenchError):
    """Instance cannot be serialized in the requested dialect."""


class RecipeInapplicableError(ReoptBenchError):
    """A generator recipe's precondition does not hold for the base instance."""

    def __init__(self, recipe: str, reason: str):
        self.recipe = recipe
        self.reason = reason
        super().__init__(f"recipe '{recipe}' is not applicable: {reason}")


class InsufficientCandidatesError(ReoptBenchError):
    """Fewer candidates than required passed the selection bands."""

    def __init__(self, band: str, qualifying: int, target: int, rejected: dict):
        self.band = band
        self.qualifying = qualifying
        self.target = target
        self.rejected = rejected
        super().__init__(
            f"only {qualifying} of {target} required candidates qualify; "
            f"failing band: {band} (rejections: {rejected})"
        )


class UndefinedSimilarityError(ReoptBenchError):
    """Similarity requested for a zero vector."""


class IncompleteTableError(ReoptBenchError):
    """A rank table is missing (series, instance) entries."""

    def __init__(self, missing: Sequence):
        self.missing = list(missing)
        preview = ", ".join(str(m) for m in self.missing[:10])
        super().__init__(f"rank table incomplete, missing entries: {preview}")


class IncompleteSeriesError(ReoptBenchError):
    """Score records do not cover every instance of a series."""

    def __init__(self, missing: Sequence[int]):
        self.missing = list(missing)
        super().__init__(f"series incomplete, missing instances: {self.missing}")


class ProtocolError(ReoptBenchError):
    """Malformed solver event stream."""

    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"event stream line {line}: {message}")


class CapabilityError(ReoptBenchError):
    """The oracle cannot enumerate this instance."""


class BackendError(ReoptBenchError):
    """A solver backend failed to produce an outcome."""


class RunIOError(ReoptBenchError):
    """File or process I/O failure, with path context."""
    exit_code = EXIT_IO

    def __init__(self, path, message: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {message}")


class TruncatedRecordError(ReoptBenchError):
    """A run record ends in a partial line; earlier lines are recovered."""
    exit_code = EXIT_IO

    def __init__(self, path: Path, byte_offset: int, recovered: Optional[List[dict]] = None):
        self.path = str(path)
        self.byte_offset = byte_offset
        self.recovered = recovered or []
        super().__init__(
            f"{self.path}: truncated record line at byte offset {byte_offset} "
            f"({len(self.recovered)} complete lines recovered)"
        )
