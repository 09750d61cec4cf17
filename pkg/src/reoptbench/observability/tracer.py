"""Stage tracing for generation, run and scoring pipelines.

Each CLI command owns one Tracer. Work is wrapped in stages::

    with tracer.stage("select", "target=50") as op:
        ...
        op.set_output("50 instances")

and the entries are written as JSONL to
``<artifacts_dir>/trace_<command>_<timestamp>_<run_id>.jsonl``.
"""

import json
import uuid
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

from reoptbench.utils.time import get_timestamp, get_timestamp_for_filename, timer


@dataclass(frozen=True)
class TraceEntry:
    """One finished stage."""
    ts: str
    run_id: str
    command: str
    stage: str
    input_summary: str
    output_summary: str
    latency_ms: float
    ok: bool
    error: Optional[str] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        record = {k: v for k, v in asdict(self).items() if v is not None}
        return json.dumps(record, ensure_ascii=False, default=str)


@dataclass
class StageRecorder:
    """Handle yielded inside a stage; fills in what the stage produced."""
    output_summary: str = ""
    metadata: Dict[str, Any] = field(default_factory=dict)

    def set_output(self, summary: str) -> None:
        self.output_summary = summary

    def set_metadata(self, **values: Any) -> None:
        self.metadata.update(values)


class Tracer:
    """Collects the stages of one command run."""

    def __init__(self, command: str, run_id: Optional[str] = None):
        self.command = command
        self.run_id = run_id or uuid.uuid4().hex[:8]
        self.entries: List[TraceEntry] = []

    @contextmanager
    def stage(self, name: str, input_summary: str) -> Iterator[StageRecorder]:
        """Time a stage and record it, also when it raises.

        Args:
            name: Stage name (candidates, select, spawn, stream, ...)
            input_summary: Short description of the stage input

        Yields:
            A StageRecorder for the output summary and metadata
        """
        recorder = StageRecorder()
        error: Optional[str] = None
        with timer() as t:
            try:
                yield recorder
            except BaseException as e:
                error = f"{type(e).__name__}: {e}"
                raise
            finally:
                self.entries.append(TraceEntry(
                    ts=get_timestamp(),
                    run_id=self.run_id,
                    command=self.command,
                    stage=name,
                    input_summary=input_summary,
                    output_summary=recorder.output_summary,
                    latency_ms=t.elapsed_ms,
                    ok=error is None,
                    error=error,
                    metadata=dict(recorder.metadata),
                ))

    def save(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.writelines(entry.to_json() + "\n" for entry in self.entries)
        return path

    def save_to_artifacts(self, artifacts_dir: str) -> Path:
        name = f"trace_{self.command}_{get_timestamp_for_filename()}_{self.run_id}.jsonl"
        return self.save(Path(artifacts_dir) / name)
