"""Solver event protocol.

A solver started as ``<command> --manifest <path>`` reports progress on
stdout, one event per line::

    EVENT series_start 0 <t>
    EVENT instance_begin <i> <t>
    EVENT instance_end <i> <t> <pb> <db> <status> <solution_path>
    EVENT series_end 0 <t>

``<t>`` is the solver's monotonic clock in seconds. Absent bounds and an
absent solution file are written as ``-``.
"""

import math
from typing import List, Optional, Sequence, Set

from reoptbench.errors import ProtocolError
from reoptbench.schemas import EventKind, RunEvent, RunStatus
from reoptbench.utils.text import format_optional_real, format_real, parse_optional_real

EVENT_PREFIX = "EVENT"


def format_event_line(
    kind: EventKind,
    instance_index: int,
    timestamp: float,
    primal_bound: Optional[float] = None,
    dual_bound: Optional[float] = None,
    status: Optional[RunStatus] = None,
    solution_path: Optional[str] = None,
) -> str:
    """Render one event line (without the trailing newline)."""
    kind = EventKind(kind)
    parts = [EVENT_PREFIX, kind.value, str(int(instance_index)), format_real(timestamp)]
    if kind is EventKind.INSTANCE_END:
        if status is None:
            raise ValueError("instance_end needs a status")
        if solution_path is not None and (not solution_path or any(c.isspace() for c in solution_path)):
            raise ValueError(f"solution path {solution_path!r} cannot be sent on the event line")
        parts += [
            format_optional_real(primal_bound),
            format_optional_real(dual_bound),
            RunStatus(status).value,
            solution_path or "-",
        ]
    return " ".join(parts)


def parse_event_line(line: str, lineno: int = 0) -> RunEvent:
    """Parse one event line.

    Raises:
        ProtocolError: the line is not a well-formed event
    """
    parts = line.split()
    if not parts or parts[0] != EVENT_PREFIX:
        raise ProtocolError(lineno, f"expected an EVENT line, got {line.strip()!r}")
    if len(parts) < 4:
        raise ProtocolError(lineno, "event line needs a kind, an index and a timestamp")
    try:
        kind = EventKind(parts[1])
    except ValueError:
        raise ProtocolError(lineno, f"unknown event kind '{parts[1]}'")
    expected = 8 if kind is EventKind.INSTANCE_END else 4
    if len(parts) != expected:
        raise ProtocolError(lineno, f"{kind.value} needs {expected - 1} fields, got {len(parts) - 1}")

    try:
        index = int(parts[2])
    except ValueError:
        raise ProtocolError(lineno, f"invalid instance index '{parts[2]}'")
    if kind in (EventKind.SERIES_START, EventKind.SERIES_END):
        if index != 0:
            raise ProtocolError(lineno, f"{kind.value} must carry index 0")
    elif index < 1:
        raise ProtocolError(lineno, f"instance index must be at least 1, got {index}")

    try:
        timestamp = float(parts[3])
    except ValueError:
        raise ProtocolError(lineno, f"invalid timestamp '{parts[3]}'")
    if not math.isfinite(timestamp):
        raise ProtocolError(lineno, f"timestamp must be finite, got '{parts[3]}'")

    payload = {}
    if kind is EventKind.INSTANCE_END:
        try:
            pb = parse_optional_real(parts[4])
            db = parse_optional_real(parts[5])
        except ValueError as e:
            raise ProtocolError(lineno, f"invalid bound: {e}")
        try:
            status = RunStatus(parts[6])
        except ValueError:
            raise ProtocolError(lineno, f"unknown status '{parts[6]}'")
        payload = dict(
            primal_bound=pb,
            dual_bound=db,
            status=status,
            solution_path=None if parts[7] == "-" else parts[7],
        )
    return RunEvent(kind=kind, instance_index=index, timestamp=timestamp, line=lineno, **payload)


def validate_event_log(events: Sequence[RunEvent], expected_count: int = 50) -> List[str]:
    """Check ordering, nesting, coverage and finality of an event log.

    Returns:
        Violations as text; empty iff the log is conforming
    """
    violations: List[str] = []
    last_timestamp: Optional[float] = None
    started = ended = False
    open_index: Optional[int] = None
    last_begun = 0
    begun: Set[int] = set()
    finalized: Set[int] = set()

    for position, event in enumerate(events):
        where = f"line {event.line}" if event.line else f"event {position + 1}"
        if last_timestamp is not None and event.timestamp <= last_timestamp:
            violations.append(
                f"{where}: timestamp {format_real(event.timestamp)} is not after {format_real(last_timestamp)}"
            )
        last_timestamp = event.timestamp
        if ended:
            violations.append(f"{where}: {event.kind.value} after series_end")

        if event.kind is EventKind.SERIES_START:
            if started or position > 0:
                violations.append(f"{where}: series_start is not the first event")
            started = True
            continue
        if not started:
            violations.append(f"{where}: {event.kind.value} before series_start")
            started = True

        i = event.instance_index
        if event.kind is EventKind.INSTANCE_BEGIN:
            if i > expected_count:
                violations.append(f"{where}: instance {i} is beyond the {expected_count} instances of the series")
            if open_index is not None:
                violations.append(f"{where}: instance {i} begins before instance {open_index} is finalized")
            if i in begun:
                violations.append(f"{where}: instance {i} begins twice")
            elif i != last_begun + 1:
                violations.append(f"{where}: instance {i} begins out of order (expected {last_begun + 1})")
            begun.add(i)
            last_begun = max(last_begun, i)
            open_index = i
        elif event.kind is EventKind.INSTANCE_END:
            if i in finalized:
                violations.append(f"{where}: result modified after finalization of instance {i}")
                continue
            if i != open_index:
                if open_index is None:
                    violations.append(f"{where}: instance {i} ends without a matching begin")
                else:
                    violations.append(f"{where}: instance {i} ends while instance {open_index} is open")
            finalized.add(i)
            if i == open_index:
                open_index = None
        elif event.kind is EventKind.SERIES_END:
            if open_index is not None:
                violations.append(f"{where}: series_end while instance {open_index} is open")
            ended = True

    if not started:
        violations.append("series_start missing")
    if not ended:
        violations.append("series_end missing")
    for i in range(1, expected_count + 1):
        if i not in finalized:
            violations.append(f"missing instance {i}")
    return violations
