"""Series runner: drives one solver process over a whole series.

The solver is started once per series as ``<command> --manifest <path>`` so
it can keep state across instances. Per-instance times are measured on the
harness clock between the receipt of ``instance_begin`` and ``instance_end``.
The process is only killed when the total budget runs out; per-instance
overruns are penalized by the score, not enforced.
"""

import logging
import math
import os
import queue
import subprocess
import tempfile
import threading
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from reoptbench.backends.base import no_bound
from reoptbench.config import Config
from reoptbench.errors import ProtocolError, ReoptBenchError, RunIOError
from reoptbench.harness.protocol import parse_event_line, validate_event_log
from reoptbench.harness.record import RecordWriter
from reoptbench.model.feasibility import FeasTolerances, check_feasibility, objective_value
from reoptbench.model.instance import Instance, Sense
from reoptbench.model.solution import read_solution
from reoptbench.mps.dialect import FREE, MpsDialect
from reoptbench.mps.reader import read_mps_file
from reoptbench.observability.tracer import Tracer
from reoptbench.schemas import (
    EventKind,
    InstanceResult,
    RunEvent,
    RunLimits,
    RunStatus,
    SeriesManifest,
    SeriesRunRecord,
    SolveOutcome,
)
from reoptbench.score.scoring import dual_bound_valid
from reoptbench.utils.time import format_duration, monotonic_seconds

logger = logging.getLogger(__name__)

# Solvers may leave NN.sol here for the instance in progress
INCUMBENT_DIR_ENV = "REOPTBENCH_INCUMBENT_DIR"
# Per-instance time limit in seconds, as enforced by the scorer
TIME_LIMIT_ENV = "REOPTBENCH_TIME_LIMIT"

THREAD_ENV_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)


def incumbent_file_name(index: int) -> str:
    return f"{index:02d}.sol"


def limits_from_manifest(manifest: SeriesManifest, config: Optional[Config] = None) -> RunLimits:
    """Default limits: manifest time limit, budget = multiplier x limit."""
    config = config or Config()
    limit = manifest.time_limit_seconds
    return RunLimits(
        per_instance_time_limit_seconds=limit,
        total_budget_seconds=config.harness.budget_multiplier * limit,
        memory_limit_bytes=config.harness.memory_limit_bytes,
        thread_limit=1,
    )


def _memory_limiter(limit_bytes: int):
    def apply():
        try:
            import resource
            resource.setrlimit(resource.RLIMIT_AS, (limit_bytes, limit_bytes))
        except (ImportError, ValueError, OSError):
            pass
    return apply


def _enforcement(limits: RunLimits) -> Dict[str, str]:
    try:
        import resource  # noqa: F401
        memory = f"RLIMIT_AS={limits.memory_limit_bytes} requested at spawn"
    except ImportError:
        memory = "not enforced on this platform"
    return {
        "memory": memory,
        "threads": f"{', '.join(THREAD_ENV_VARS)}={limits.thread_limit}",
        "time": "harness clock; kill at total budget only",
    }


def _pump(stream, lines: "queue.Queue") -> None:
    for text in iter(stream.readline, ""):
        lines.put((text, monotonic_seconds()))
    lines.put(None)


def _terminate(process: subprocess.Popen, grace_seconds: float) -> None:
    if process.poll() is not None:
        return
    process.terminate()
    try:
        process.wait(timeout=grace_seconds)
    except subprocess.TimeoutExpired:
        process.kill()
        process.wait()


def outcome_from_event(
    event: RunEvent,
    time_spent: float,
    time_limit: float
) -> Tuple[SolveOutcome, List[str]]:
    """Scorer view of an instance_end payload, with notes on anything dropped."""
    notes: List[str] = []
    status = event.status or RunStatus.ERROR
    pb, db = event.primal_bound, event.dual_bound
    feasible = status in (RunStatus.OPTIMAL, RunStatus.TIMEOUT_INCUMBENT)
    if feasible and (pb is None or not math.isfinite(pb)):
        notes.append(f"status {status.value} reported without a finite primal bound")
        feasible = False
    if status is RunStatus.ERROR:
        db = None
    outcome = SolveOutcome(
        time_spent_seconds=max(0.0, time_spent),
        time_limit_seconds=time_limit,
        solved_to_optimality=status is RunStatus.OPTIMAL and feasible,
        primal_bound=pb if feasible else None,
        dual_bound=db,
        has_feasible_solution=feasible,
        stopped_early_without_zero_gap=status is not RunStatus.OPTIMAL and time_spent < time_limit,
    )
    return outcome, notes


def audit_result(
    instance: Optional[Instance],
    outcome: SolveOutcome,
    solution_path: Optional[str],
    config: Config
) -> List[str]:
    """Audit notes for one outcome; an empty list means the result is valid."""
    notes: List[str] = []
    if instance is None:
        if outcome.has_feasible_solution:
            notes.append("instance file could not be read, solution not checked")
        return notes
    if not dual_bound_valid(outcome, instance.sense, config.scoring):
        notes.append(
            f"dual bound {outcome.dual_bound} crosses primal bound {outcome.primal_bound}"
        )
    if not outcome.has_feasible_solution:
        return notes
    if solution_path is None:
        notes.append("no solution file for a reported feasible solution")
        return notes
    try:
        solution = read_solution(Path(solution_path), instance)
    except ReoptBenchError as e:
        notes.append(f"unreadable solution: {e}")
        return notes

    report = check_feasibility(instance, solution, FeasTolerances.from_config(config.feasibility))
    if not report.feasible:
        notes.append(f"solution is infeasible (worst offender: {report.worst_offender})")
    value = objective_value(instance, solution)
    pb = outcome.primal_bound
    if abs(value - pb) > config.scoring.dual_bound_tolerance * max(1.0, abs(pb)):
        notes.append(f"primal bound {pb!r} differs from the solution objective {value!r}")
    return notes


class _SeriesRun:
    """Mutable state of one run; owned by the thread calling run_series."""

    def __init__(
        self,
        manifest: SeriesManifest,
        manifest_path: Path,
        limits: RunLimits,
        config: Config,
        dialect: MpsDialect,
        writer: Optional[RecordWriter]
    ):
        self.manifest = manifest
        self.paths = manifest.instance_paths(manifest_path)
        self.limits = limits
        self.config = config
        self.dialect = dialect
        self.writer = writer
        self.events: List[RunEvent] = []
        self.results: Dict[int, InstanceResult] = {}
        self.begun_at: Dict[int, float] = {}
        self.last_received: Optional[float] = None

    @property
    def count(self) -> int:
        return len(self.paths)

    def instance(self, index: int) -> Optional[Instance]:
        try:
            return read_mps_file(self.paths[index - 1], self.dialect)
        except ReoptBenchError as e:
            logger.warning("cannot read instance %d for the audit: %s", index, e)
            return None

    def receive(self, event: RunEvent) -> None:
        self.events.append(event)
        result = None
        i = event.instance_index
        if event.kind is EventKind.INSTANCE_BEGIN:
            self.begun_at.setdefault(i, event.received_at)
        elif event.kind is EventKind.INSTANCE_END and 1 <= i <= self.count and i not in self.results:
            start = self.begun_at.get(i, self.last_received if self.last_received is not None else event.received_at)
            result = self.finalize(i, event, event.received_at - start)
            self.results[i] = result
        self.last_received = event.received_at
        if self.writer is not None:
            self.writer.event(event, result)

    def finalize(self, index: int, event: RunEvent, time_spent: float) -> InstanceResult:
        limit = self.limits.per_instance_time_limit_seconds
        outcome, notes = outcome_from_event(event, time_spent, limit)
        notes += audit_result(self.instance(index), outcome, event.solution_path, self.config)
        if notes:
            logger.warning("instance %d: %s", index, "; ".join(notes))
        return InstanceResult(
            index=index,
            instance_file=self.manifest.instance_files[index - 1],
            status=event.status or RunStatus.ERROR,
            outcome=outcome,
            solution_path=event.solution_path,
            valid=not notes,
            audit_notes=notes,
        )

    def synthesize(self, index: int, stopped_at: float, incumbent_dir: Path) -> InstanceResult:
        """Outcome for an instance that never got an end event."""
        limit = self.limits.per_instance_time_limit_seconds
        time_spent = stopped_at - self.begun_at[index] if index in self.begun_at else limit
        instance = self.instance(index)
        sense = instance.sense if instance is not None else Sense.MINIMIZE
        incumbent = incumbent_dir / incumbent_file_name(index)

        if instance is not None and incumbent.exists():
            try:
                solution = read_solution(incumbent, instance)
                tolerances = FeasTolerances.from_config(self.config.feasibility)
                if check_feasibility(instance, solution, tolerances).feasible:
                    outcome = SolveOutcome(
                        time_spent_seconds=max(0.0, time_spent),
                        time_limit_seconds=limit,
                        primal_bound=objective_value(instance, solution),
                        dual_bound=no_bound(sense),
                        has_feasible_solution=True,
                    )
                    return InstanceResult(
                        index=index,
                        instance_file=self.manifest.instance_files[index - 1],
                        status=RunStatus.TIMEOUT_INCUMBENT,
                        outcome=outcome,
                        solution_path=str(incumbent),
                        synthesized=True,
                        audit_notes=["no instance_end; scored from the incumbent file"],
                    )
                logger.warning("incumbent file for instance %d is infeasible", index)
            except ReoptBenchError as e:
                logger.warning("incumbent file for instance %d is unusable: %s", index, e)

        outcome = SolveOutcome(
            time_spent_seconds=max(0.0, time_spent),
            time_limit_seconds=limit,
            dual_bound=no_bound(sense),
        )
        return InstanceResult(
            index=index,
            instance_file=self.manifest.instance_files[index - 1],
            status=RunStatus.TIMEOUT_NOFEAS,
            outcome=outcome,
            synthesized=True,
            audit_notes=["no instance_end; scored as timeout without a feasible solution"],
        )


def run_series(
    solver_command: Sequence[str],
    manifest_path: Path,
    limits: Optional[RunLimits] = None,
    config: Optional[Config] = None,
    tracer: Optional[Tracer] = None,
    record_path: Optional[Path] = None,
    stderr_path: Optional[Path] = None,
    dialect: MpsDialect = FREE,
) -> SeriesRunRecord:
    """Run a solver over a series and collect one result per instance.

    Args:
        solver_command: Executable and its fixed arguments
        manifest_path: Series manifest passed to the solver
        limits: Resource limits (default: derived from the manifest)
        config: Harness, feasibility and scoring settings
        tracer: Optional stage tracer
        record_path: If given, the record is streamed there line by line
        stderr_path: If given, the solver's stderr goes there
        dialect: MPS dialect of the instance files (for the audit)

    Returns:
        SeriesRunRecord with exactly one result per manifest instance

    Raises:
        RunIOError: the solver cannot be started
        ProtocolError: the solver wrote a malformed event line (the run is aborted)
    """
    config = config or Config()
    tracer = tracer or Tracer("run")
    manifest_path = Path(manifest_path)
    manifest = SeriesManifest.load(manifest_path)
    limits = limits or limits_from_manifest(manifest, config)
    command = list(solver_command) + ["--manifest", str(manifest_path)]
    enforcement = _enforcement(limits)

    with tempfile.TemporaryDirectory(prefix="reoptbench_incumbents_") as incumbent_dir:
        env = dict(os.environ)
        env.update({name: str(limits.thread_limit) for name in THREAD_ENV_VARS})
        env[INCUMBENT_DIR_ENV] = incumbent_dir
        env[TIME_LIMIT_ENV] = repr(float(limits.per_instance_time_limit_seconds))

        with tracer.stage("spawn", " ".join(command)) as op:
            stderr = None
            try:
                if stderr_path is not None:
                    Path(stderr_path).parent.mkdir(parents=True, exist_ok=True)
                    stderr = open(stderr_path, "w", encoding="utf-8")
                process = subprocess.Popen(
                    command,
                    stdout=subprocess.PIPE,
                    stderr=stderr,
                    stdin=subprocess.DEVNULL,
                    text=True,
                    bufsize=1,
                    env=env,
                    preexec_fn=_memory_limiter(limits.memory_limit_bytes) if os.name == "posix" else None,
                )
            except OSError as e:
                if stderr is not None:
                    stderr.close()
                raise RunIOError(command[0], f"cannot start solver: {e}")
            op.set_output(f"pid {process.pid}")
            op.set_metadata(enforcement=enforcement)

        writer = RecordWriter(record_path) if record_path is not None else None
        try:
            if writer is not None:
                writer.header(str(manifest_path), manifest.series_name, list(solver_command), limits, enforcement)
            run = _SeriesRun(manifest, manifest_path, limits, config, dialect, writer)
            killed = False

            with tracer.stage("stream", manifest.series_name) as op:
                lines: "queue.Queue" = queue.Queue()
                reader = threading.Thread(target=_pump, args=(process.stdout, lines), daemon=True)
                reader.start()
                deadline = monotonic_seconds() + limits.total_budget_seconds
                lineno = 0
                try:
                    while True:
                        remaining = deadline - monotonic_seconds()
                        if remaining <= 0:
                            logger.warning(
                                "total budget of %s exhausted, killing the solver",
                                format_duration(limits.total_budget_seconds),
                            )
                            _terminate(process, config.harness.kill_grace_seconds)
                            killed = True
                            break
                        try:
                            item = lines.get(timeout=remaining)
                        except queue.Empty:
                            continue
                        if item is None:
                            break
                        text, received_at = item
                        lineno += 1
                        if not text.strip():
                            continue
                        event = parse_event_line(text, lineno)
                        run.receive(event.model_copy(update={"received_at": received_at}))
                except ProtocolError:
                    _terminate(process, config.harness.kill_grace_seconds)
                    raise
                stopped_at = monotonic_seconds()
                returncode = process.wait()
                reader.join(timeout=1.0)
                process.stdout.close()
                op.set_output(f"{len(run.events)} events, {len(run.results)} results, exit code {returncode}")

            with tracer.stage("finalize", manifest.series_name) as op:
                violations = validate_event_log(run.events, run.count)
                if killed:
                    violations.append(
                        f"solver killed after exhausting the total budget of {limits.total_budget_seconds}s"
                    )
                elif returncode != 0:
                    violations.append(f"solver exited with code {returncode}")
                synthesized = [
                    run.synthesize(i, stopped_at, Path(incumbent_dir))
                    for i in range(1, run.count + 1)
                    if i not in run.results
                ]
                if writer is not None:
                    writer.footer(violations, synthesized)
                op.set_output(f"{len(violations)} violations, {len(synthesized)} synthesized")
        finally:
            if stderr is not None:
                stderr.close()
            if writer is not None:
                writer.close()

    results = sorted(list(run.results.values()) + synthesized, key=lambda r: r.index)
    return SeriesRunRecord(
        manifest_path=str(manifest_path),
        series_name=manifest.series_name,
        solver_command=list(solver_command),
        limits=limits,
        enforcement=enforcement,
        events=run.events,
        results=results,
        protocol_violations=violations,
    )
