"""Line-delimited JSON run records.

Layout: one ``header`` line, one ``event`` line per protocol event (the
audited result of an instance is folded into its first ``instance_end``
line) and one ``footer`` line with the protocol violations and the results
the harness had to synthesize. Lines are flushed as they are written, so a
crashed run leaves every completed line readable.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from reoptbench.errors import InvalidInputError, RunIOError, TruncatedRecordError
from reoptbench.schemas import EventKind, InstanceResult, RunEvent, RunLimits, SeriesRunRecord


def _dump(data: Dict[str, Any]) -> str:
    # Infinite bounds are written as Infinity / -Infinity
    return json.dumps(data, sort_keys=True, allow_nan=True)


class RecordWriter:
    """Append-only writer for one run record."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.lines_written = 0
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._file = open(self.path, "w", encoding="utf-8")
        except OSError as e:
            raise RunIOError(self.path, f"cannot create run record: {e}")

    def _write(self, data: Dict[str, Any]) -> None:
        try:
            self._file.write(_dump(data) + "\n")
            self._file.flush()
        except OSError as e:
            raise RunIOError(self.path, f"cannot append to run record: {e}")
        self.lines_written += 1

    def header(
        self,
        manifest_path: str,
        series_name: str,
        solver_command: List[str],
        limits: RunLimits,
        enforcement: Dict[str, str]
    ) -> None:
        self._write({
            "type": "header",
            "manifest_path": manifest_path,
            "series_name": series_name,
            "solver_command": solver_command,
            "limits": limits.model_dump(),
            "enforcement": enforcement,
        })

    def event(self, event: RunEvent, result: Optional[InstanceResult] = None) -> None:
        self._write({
            "type": "event",
            "event": event.model_dump(),
            "result": result.model_dump() if result is not None else None,
        })

    def footer(self, protocol_violations: List[str], synthesized: List[InstanceResult]) -> None:
        self._write({
            "type": "footer",
            "protocol_violations": protocol_violations,
            "synthesized": [r.model_dump() for r in synthesized],
        })

    def close(self) -> None:
        self._file.close()

    def __enter__(self) -> "RecordWriter":
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()
        return False


def persist_run(record: SeriesRunRecord, path: Path) -> Path:
    """Write a complete record in the line-delimited layout."""
    attached = {r.index: r for r in record.results if not r.synthesized}
    with RecordWriter(path) as writer:
        writer.header(
            record.manifest_path,
            record.series_name,
            record.solver_command,
            record.limits,
            record.enforcement,
        )
        for event in record.events:
            result = None
            if event.kind is EventKind.INSTANCE_END:
                result = attached.pop(event.instance_index, None)
            writer.event(event, result)
        if attached:
            raise InvalidInputError(
                f"results for instances {sorted(attached)} have no instance_end event to attach to"
            )
        writer.footer(record.protocol_violations, [r for r in record.results if r.synthesized])
    return Path(path)


def load_run(path: Path) -> SeriesRunRecord:
    """Read a record written by persist_run or by a live run.

    Raises:
        TruncatedRecordError: last line is partial or the footer is missing;
            the complete lines are attached to the error
        RunIOError: the file cannot be read
        InvalidInputError: a complete line is not a valid record line
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise RunIOError(path, f"cannot read run record: {e}")

    lines: List[Dict[str, Any]] = []
    offset = 0
    while offset < len(data):
        end = data.find(b"\n", offset)
        if end < 0:
            raise TruncatedRecordError(path, offset, lines)
        try:
            lines.append(json.loads(data[offset:end].decode("utf-8")))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise InvalidInputError(f"{path}: byte offset {offset}: invalid record line: {e}")
        offset = end + 1

    if not lines or lines[0].get("type") != "header":
        raise InvalidInputError(f"{path}: run record does not start with a header line")
    if lines[-1].get("type") != "footer":
        raise TruncatedRecordError(path, len(data), lines)

    header, footer = lines[0], lines[-1]
    try:
        events: List[RunEvent] = []
        results: List[InstanceResult] = []
        for line in lines[1:-1]:
            if line.get("type") != "event":
                raise InvalidInputError(f"{path}: unexpected record line type {line.get('type')!r}")
            events.append(RunEvent.model_validate(line["event"]))
            if line.get("result") is not None:
                results.append(InstanceResult.model_validate(line["result"]))
        results.extend(InstanceResult.model_validate(r) for r in footer.get("synthesized", []))
        results.sort(key=lambda r: r.index)
        return SeriesRunRecord(
            manifest_path=header["manifest_path"],
            series_name=header["series_name"],
            solver_command=header["solver_command"],
            limits=RunLimits.model_validate(header["limits"]),
            enforcement=header.get("enforcement", {}),
            events=events,
            results=results,
            protocol_violations=footer.get("protocol_violations", []),
        )
    except (KeyError, ValidationError) as e:
        raise InvalidInputError(f"{path}: invalid run record: {e}")
