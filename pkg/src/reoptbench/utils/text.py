"""Text formatting of reals and names shared by the file formats."""

import math
import re
from typing import Optional

# Magnitudes at or above this are infinite at the file-format boundary.
INFINITY_THRESHOLD = 1e30

_NAME_PATTERN = re.compile(r"^\S+$")


def format_real(value: float) -> str:
    """Shortest round-trip text for a float (at most 17 significant digits)."""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(float(value))


def parse_real(token: str) -> float:
    """Parse a real, mapping +-1e30 sentinels and 'inf' spellings to infinities."""
    value = float(token)
    if math.isnan(value):
        raise ValueError(f"NaN is not a valid number: {token!r}")
    if value >= INFINITY_THRESHOLD:
        return math.inf
    if value <= -INFINITY_THRESHOLD:
        return -math.inf
    return value


def format_optional_real(value: Optional[float]) -> str:
    """Protocol token for an optional real: '-' when absent."""
    return "-" if value is None else format_real(value)


def parse_optional_real(token: str) -> Optional[float]:
    """Inverse of format_optional_real."""
    if token == "-":
        return None
    value = float(token)
    if math.isnan(value):
        raise ValueError(f"NaN is not a valid bound: {token!r}")
    return value


def is_plain_name(name: str) -> bool:
    """True if the name is non-empty and contains no whitespace."""
    return bool(_NAME_PATTERN.match(name))


def truncate_text(text: str, max_length: int, suffix: str = "...") -> str:
    """Truncate text to a maximum length."""
    if len(text) <= max_length:
        return text
    return text[:max_length - len(suffix)] + suffix
