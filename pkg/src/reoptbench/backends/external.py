"""External solver adapter for reoptbench.

The solver is invoked once per instance as::

    <command> --instance <mps> --time-limit <s> [--warm-start <sol>] [--cutoff <v>]

and must print a line ``RESULT <status> <pb> <db> <solution_path|->`` on
stdout. The last RESULT line wins; other output is ignored.
"""

import logging
import math
import shlex
import subprocess
import tempfile
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from reoptbench.backends.base import Backend, BackendResult, no_bound
from reoptbench.errors import BackendError, ReoptBenchError
from reoptbench.model.instance import Instance, Solution
from reoptbench.model.solution import read_solution, write_solution
from reoptbench.mps.writer import write_mps_file
from reoptbench.schemas import RunStatus, SolveOutcome
from reoptbench.utils.text import format_real, parse_optional_real, truncate_text
from reoptbench.utils.time import timer

logger = logging.getLogger(__name__)

# Grace on top of the time limit before the process is killed
TIME_LIMIT_GRACE = 1.1


def parse_result_line(stdout: str) -> Tuple[RunStatus, Optional[float], Optional[float], Optional[str]]:
    """Find the last RESULT line and split it into its fields."""
    found = None
    for line in stdout.splitlines():
        if line.startswith("RESULT "):
            found = line
    if found is None:
        raise BackendError("solver printed no RESULT line")
    parts = found.split()
    if len(parts) != 5:
        raise BackendError(f"malformed RESULT line: {found!r}")
    _, status, pb, db, path = parts
    try:
        return (
            RunStatus(status),
            parse_optional_real(pb),
            parse_optional_real(db),
            None if path == "-" else path,
        )
    except ValueError as e:
        raise BackendError(f"malformed RESULT line {found!r}: {e}")


class ExternalBackend(Backend):
    """Runs an external solver executable on each instance."""

    name = "exec"

    def __init__(self, command: Union[str, Sequence[str]]):
        """Initialize the adapter.

        Args:
            command: Executable plus fixed arguments, as a list or a shell-style string
        """
        self.command: List[str] = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.command:
            raise BackendError("external backend needs a command")

    def solve(
        self,
        instance: Instance,
        time_limit: float,
        warm_start: Optional[Solution] = None,
        cutoff: Optional[float] = None,
        instance_path: Optional[Path] = None,
    ) -> BackendResult:
        with tempfile.TemporaryDirectory(prefix="reoptbench_exec_") as workdir:
            workdir = Path(workdir)
            if instance_path is None:
                instance_path = write_mps_file(instance, workdir / f"{instance.name}.mps")
            args = self.command + [
                "--instance", str(instance_path),
                "--time-limit", format_real(float(time_limit)),
            ]
            if warm_start is not None:
                args += ["--warm-start", str(write_solution(workdir / "warm.sol", instance, warm_start))]
            if cutoff is not None:
                args += ["--cutoff", format_real(cutoff)]

            logger.debug("running %s", " ".join(args))
            completed = None
            with timer() as t:
                try:
                    completed = subprocess.run(
                        args,
                        capture_output=True,
                        text=True,
                        timeout=time_limit * TIME_LIMIT_GRACE,
                    )
                except subprocess.TimeoutExpired:
                    logger.warning("%s exceeded %.3gs and was killed", self.command[0], time_limit)
                except OSError as e:
                    raise BackendError(f"cannot run {self.command[0]}: {e}")

            if completed is None:
                outcome = SolveOutcome(
                    time_spent_seconds=t.elapsed_seconds,
                    time_limit_seconds=time_limit,
                    dual_bound=no_bound(instance.sense),
                )
                return BackendResult(outcome, None, RunStatus.TIMEOUT_NOFEAS)
            if completed.returncode != 0:
                raise BackendError(
                    f"{self.command[0]} exited with code {completed.returncode}: "
                    f"{truncate_text(completed.stderr.strip(), 200)}"
                )
            status, pb, db, solution_path = parse_result_line(completed.stdout)
            solution = None
            if solution_path is not None:
                try:
                    solution = read_solution(Path(solution_path), instance)
                except ReoptBenchError as e:
                    raise BackendError(f"unusable solution from {self.command[0]}: {e}")

        return self._result(status, pb, db, solution, t.elapsed_seconds, time_limit)

    @staticmethod
    def _result(
        status: RunStatus,
        pb: Optional[float],
        db: Optional[float],
        solution: Optional[Solution],
        elapsed: float,
        time_limit: float
    ) -> BackendResult:
        if status is RunStatus.ERROR:
            raise BackendError("solver reported status error")
        feasible = status is not RunStatus.TIMEOUT_NOFEAS and pb is not None and math.isfinite(pb)
        try:
            outcome = SolveOutcome(
                time_spent_seconds=elapsed,
                time_limit_seconds=time_limit,
                solved_to_optimality=status is RunStatus.OPTIMAL and feasible,
                primal_bound=pb if feasible else None,
                dual_bound=db,
                has_feasible_solution=feasible,
            )
        except ValueError as e:
            raise BackendError(f"inconsistent solver result: {e}")
        if not feasible:
            status = RunStatus.TIMEOUT_NOFEAS
        return BackendResult(outcome, solution if feasible else None, status)
