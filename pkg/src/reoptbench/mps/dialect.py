"""MPS dialect selection."""

from dataclasses import dataclass
from enum import Enum


class MpsMode(str, Enum):
    FIXED = "fixed"
    FREE = "free"


@dataclass(frozen=True)
class MpsDialect:
    """How MPS text is laid out and which optional sections are honored."""
    mode: MpsMode = MpsMode.FREE
    objective_sense_section_honored: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mode", MpsMode(self.mode))

    @property
    def is_fixed(self) -> bool:
        return self.mode is MpsMode.FIXED

    @classmethod
    def from_name(cls, name: str) -> "MpsDialect":
        """Dialect from a CLI/config name ('free' or 'fixed')."""
        return cls(mode=MpsMode(name.lower()))


FREE = MpsDialect()
FIXED = MpsDialect(mode=MpsMode.FIXED)

# 1-based start columns and widths of the six fixed-format fields
FIXED_FIELDS = ((2, 2), (5, 8), (15, 8), (25, 12), (40, 8), (50, 12))
