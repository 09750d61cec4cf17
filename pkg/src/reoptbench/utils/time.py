"""Clocks and duration formatting.

Measured solve times always come from the monotonic clock; wall-clock
timestamps only label traces and file names.
"""

import time
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime
from typing import Iterator, Optional


def get_timestamp() -> str:
    return datetime.now().isoformat()


def get_timestamp_for_filename() -> str:
    return datetime.now().strftime("%Y%m%d_%H%M%S")


def monotonic_seconds() -> float:
    return time.monotonic()


@dataclass
class Stopwatch:
    """Elapsed monotonic time; reads the live clock until stopped."""
    start: float
    stop: Optional[float] = None

    @property
    def elapsed_seconds(self) -> float:
        end = self.stop if self.stop is not None else monotonic_seconds()
        return end - self.start

    @property
    def elapsed_ms(self) -> float:
        return self.elapsed_seconds * 1000.0


@contextmanager
def timer() -> Iterator[Stopwatch]:
    """Measure the enclosed block: ``with timer() as t: ...; t.elapsed_seconds``."""
    watch = Stopwatch(start=monotonic_seconds())
    try:
        yield watch
    finally:
        watch.stop = monotonic_seconds()


def format_duration(seconds: float) -> str:
    """Human-readable duration: 850.0ms, 12.34s, 3m 5.0s."""
    if seconds < 1:
        return f"{seconds * 1000:.1f}ms"
    if seconds < 60:
        return f"{seconds:.2f}s"
    minutes, rest = divmod(seconds, 60)
    return f"{int(minutes)}m {rest:.1f}s"
