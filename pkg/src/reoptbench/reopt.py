"""Baseline reoptimizing solver for reoptbench.

Solves the instances of a series in order and carries primal information
from one instance to the next: the best pool solution that is still feasible
becomes the warm start, and its objective the cutoff. It speaks the harness
protocol on stdout; all logging goes to stderr.
"""

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence, TextIO, Tuple

import numpy as np

from reoptbench.backends.base import Backend, BackendResult, no_bound
from reoptbench.backends.external import ExternalBackend
from reoptbench.backends.oracle import EnumerationBackend
from reoptbench.config import Config, ReoptConfig
from reoptbench.errors import EXIT_USAGE, ReoptBenchError, StructuralError
from reoptbench.harness.protocol import format_event_line
from reoptbench.harness.runner import INCUMBENT_DIR_ENV, TIME_LIMIT_ENV, incumbent_file_name
from reoptbench.model.feasibility import (
    DEFAULT_TOLERANCES,
    FeasTolerances,
    check_feasibility,
    objective_value,
)
from reoptbench.model.instance import Instance, Sense, Solution
from reoptbench.model.solution import write_solution
from reoptbench.mps.dialect import FREE, MpsDialect
from reoptbench.mps.reader import read_mps_file
from reoptbench.schemas import EventKind, RunStatus, SeriesManifest, SolveOutcome
from reoptbench.utils.time import monotonic_seconds, timer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PoolEntry:
    """A solution kept for later instances, with the objective it had when found."""
    solution: Solution
    objective: float
    solve_number: int


@dataclass(frozen=True)
class CarryState:
    """Information carried from solved instances to the next one.

    The pool holds the most recent distinct solutions, newest first.
    nonzero_counts[j] counts the pooled solutions in which variable j was
    nonzero; best_history holds the reported primal bound per solved instance.
    """
    pool: Tuple[PoolEntry, ...] = ()
    previous_instance: Optional[Instance] = None
    nonzero_counts: Optional[np.ndarray] = None
    solved_count: int = 0
    best_history: Tuple[Optional[float], ...] = field(default_factory=tuple)

    @property
    def num_variables(self) -> Optional[int]:
        if self.previous_instance is not None:
            return self.previous_instance.num_variables
        if self.pool:
            return len(self.pool[0].solution)
        return None

    def fixing_frequencies(self) -> Optional[np.ndarray]:
        """Share of solved instances in which each variable was nonzero."""
        if self.nonzero_counts is None or self.solved_count == 0:
            return None
        return self.nonzero_counts / self.solved_count


def _sign(sense: Sense) -> float:
    # Internal keys are always minimized
    return 1.0 if sense is Sense.MINIMIZE else -1.0


def carry_incumbent(
    state: CarryState,
    next_instance: Instance,
    tolerances: FeasTolerances = DEFAULT_TOLERANCES
) -> Optional[Solution]:
    """Best pool solution that is feasible for the next instance.

    Solutions are re-evaluated under the next instance's objective; on ties
    the most recent one wins.

    Raises:
        StructuralError: the pool was built on a different variable count
    """
    n = state.num_variables
    if n is not None and n != next_instance.num_variables:
        raise StructuralError(
            f"carried state has {n} variables, instance '{next_instance.name}' has "
            f"{next_instance.num_variables}"
        )
    sign = _sign(next_instance.sense)
    best: Optional[Solution] = None
    best_key = None
    for entry in state.pool:
        if not check_feasibility(next_instance, entry.solution, tolerances).feasible:
            continue
        key = sign * objective_value(next_instance, entry.solution)
        if best_key is None or key < best_key:
            best, best_key = entry.solution, key
    return best


def _update_state(
    state: CarryState,
    instance: Instance,
    solve_number: int,
    result: BackendResult,
    pool_size: int
) -> CarryState:
    pool = list(state.pool)
    counts = state.nonzero_counts
    solved = state.solved_count
    if result.solution is not None:
        value = objective_value(instance, result.solution)
        pool = [e for e in pool if e.solution != result.solution]
        pool.insert(0, PoolEntry(result.solution, value, solve_number))
        nonzero = (np.abs(result.solution.as_array()) > 0).astype(np.int64)
        counts = nonzero if counts is None else counts + nonzero
        solved += 1
    return replace(
        state,
        pool=tuple(pool[:pool_size]),
        previous_instance=instance,
        nonzero_counts=counts,
        solved_count=solved,
        best_history=state.best_history + (result.outcome.primal_bound,),
    )


def _dominate(
    result: BackendResult,
    instance: Instance,
    warm: Solution,
    warm_value: float,
    slack: float
) -> BackendResult:
    """Fall back to the warm solution when the backend did not beat it.

    Bounds are compared as sign * value, so smaller is better for both senses.
    A dual bound within slack of the warm value (the cutoff itself included)
    proves the warm solution optimal.
    """
    sign = _sign(instance.sense)
    pb = result.outcome.primal_bound
    if result.outcome.has_feasible_solution and sign * pb <= sign * warm_value:
        return result
    db = result.outcome.dual_bound
    warm_key = sign * warm_value
    if db is not None and warm_key - slack <= sign * db <= warm_key + slack:
        outcome = result.outcome.model_copy(update={
            "primal_bound": warm_value,
            "dual_bound": warm_value,
            "has_feasible_solution": True,
            "solved_to_optimality": True,
        })
        return BackendResult(outcome=outcome, solution=warm, status=RunStatus.OPTIMAL)
    if db is None or sign * db > warm_key:
        db = no_bound(instance.sense)
    outcome = result.outcome.model_copy(update={
        "primal_bound": warm_value,
        "dual_bound": db,
        "has_feasible_solution": True,
        "solved_to_optimality": False,
    })
    return BackendResult(outcome=outcome, solution=warm, status=RunStatus.TIMEOUT_INCUMBENT)


def solve_reopt(
    state: CarryState,
    next_instance: Instance,
    time_limit: float,
    backend: Backend,
    config: Optional[ReoptConfig] = None,
    tolerances: FeasTolerances = DEFAULT_TOLERANCES,
    instance_path: Optional[Path] = None,
    incumbent_path: Optional[Path] = None,
) -> Tuple[BackendResult, CarryState]:
    """Solve the next instance of a series, warm-started from the carried state.

    Args:
        state: State carried from the previous instances
        next_instance: Instance to solve
        time_limit: Seconds for the backend
        backend: Exact solver backend
        config: Pool size and cutoff slack
        tolerances: Feasibility tolerances for the warm start
        instance_path: File of the instance, for file-based backends
        incumbent_path: If given, the warm solution is written there before solving

    Returns:
        (result, new_state); on backend failure the result has status error
        and the state is returned unchanged
    """
    config = config or ReoptConfig()
    warm = carry_incumbent(state, next_instance, tolerances)
    cutoff = None
    warm_value = None
    if warm is not None:
        warm_value = objective_value(next_instance, warm)
        cutoff = warm_value + _sign(next_instance.sense) * config.cutoff_slack
        if incumbent_path is not None:
            write_solution(incumbent_path, next_instance, warm)
        logger.info("warm start for %s with objective %r", next_instance.name, warm_value)

    with timer() as t:
        try:
            result = backend.solve(next_instance, time_limit, warm, cutoff, instance_path)
        except ReoptBenchError as e:
            result = None
            error = e
    if result is None:
        logger.error("backend %s failed on %s: %s", backend.name, next_instance.name, error)
        outcome = SolveOutcome(time_spent_seconds=t.elapsed_seconds, time_limit_seconds=time_limit)
        return BackendResult(outcome=outcome, solution=None, status=RunStatus.ERROR), state

    if warm is not None:
        result = _dominate(result, next_instance, warm, warm_value, config.cutoff_slack)
    solve_number = len(state.best_history) + 1
    return result, _update_state(state, next_instance, solve_number, result, config.pool_size)


class _EventClock:
    """Monotonic timestamps, forced to be strictly increasing."""

    def __init__(self, clock: Callable[[], float] = monotonic_seconds):
        self.clock = clock
        self.last: Optional[float] = None

    def __call__(self) -> float:
        now = self.clock()
        if self.last is not None and now <= self.last:
            now = self.last + 1e-6
        self.last = now
        return now


def serve_protocol(
    manifest_path: Path,
    backend: Backend,
    solutions_dir: Path,
    config: Optional[Config] = None,
    out: TextIO = sys.stdout,
    dialect: MpsDialect = FREE,
    incumbent_dir: Optional[Path] = None,
    time_limit: Optional[float] = None,
) -> CarryState:
    """Solve a series in manifest order, emitting harness events on out.

    Instance i+1 is only read after the end event of instance i is written.
    An unreadable instance is reported with status error and skipped.
    time_limit overrides the manifest's per-instance limit.
    """
    config = config or Config()
    tolerances = FeasTolerances.from_config(config.feasibility)
    manifest = SeriesManifest.load(manifest_path)
    paths = manifest.instance_paths(manifest_path)
    time_limit = time_limit or manifest.time_limit_seconds
    solutions_dir = Path(solutions_dir)
    clock = _EventClock()
    state = CarryState()

    def emit(kind: EventKind, index: int, **payload) -> None:
        out.write(format_event_line(kind, index, clock(), **payload) + "\n")
        out.flush()

    emit(EventKind.SERIES_START, 0)
    for index, path in enumerate(paths, start=1):
        emit(EventKind.INSTANCE_BEGIN, index)
        try:
            instance = read_mps_file(path, dialect)
        except ReoptBenchError as e:
            logger.error("instance %d: %s", index, e)
            emit(EventKind.INSTANCE_END, index, status=RunStatus.ERROR)
            continue

        incumbent_path = incumbent_dir / incumbent_file_name(index) if incumbent_dir else None
        try:
            result, state = solve_reopt(
                state,
                instance,
                time_limit,
                backend,
                config.reopt,
                tolerances,
                instance_path=path,
                incumbent_path=incumbent_path,
            )
        except StructuralError as e:
            logger.error("instance %d: %s", index, e)
            emit(EventKind.INSTANCE_END, index, status=RunStatus.ERROR)
            continue

        solution_path = None
        if result.solution is not None:
            solution_path = str(
                write_solution(solutions_dir / incumbent_file_name(index), instance, result.solution).resolve()
            )
        outcome = result.outcome
        emit(
            EventKind.INSTANCE_END,
            index,
            primal_bound=outcome.primal_bound,
            dual_bound=outcome.dual_bound,
            status=result.status,
            solution_path=solution_path,
        )
        logger.info("instance %d: %s pb=%s", index, result.status.value, outcome.primal_bound)
    emit(EventKind.SERIES_END, 0)
    return state


def get_backend(spec: str, config: Config) -> Backend:
    """Backend from a --backend value: 'oracle' or 'exec:<command>'."""
    if spec == "oracle":
        return EnumerationBackend(config.oracle, FeasTolerances.from_config(config.feasibility))
    if spec.startswith("exec:") and spec[len("exec:"):].strip():
        return ExternalBackend(spec[len("exec:"):])
    raise ValueError(f"unknown backend '{spec}' (expected 'oracle' or 'exec:<command>')")


def main(argv: Optional[Sequence[str]] = None):
    """CLI entry point of the baseline solver (run by the harness)."""
    parser = argparse.ArgumentParser(
        description="Baseline reoptimizing solver speaking the reoptbench protocol"
    )
    parser.add_argument(
        "--manifest",
        type=str,
        required=True,
        help="Series manifest to solve"
    )
    parser.add_argument(
        "--backend",
        type=str,
        default="oracle",
        help="'oracle' for the built-in enumerator or 'exec:<command>'"
    )
    parser.add_argument(
        "--solutions-dir",
        type=str,
        default=None,
        help="Where solution files are written (default: ./solutions/<series>)"
    )
    parser.add_argument(
        "--config",
        type=str,
        default=None,
        help="Optional YAML configuration file"
    )
    parser.add_argument(
        "--verbose",
        action="store_true",
        help="Log progress to stderr"
    )
    args = parser.parse_args(argv)

    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        config = Config.load(Path(args.config) if args.config else None)
        backend = get_backend(args.backend, config)
    except (ValueError, OSError) as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        sys.exit(EXIT_USAGE)

    manifest_path = Path(args.manifest)
    try:
        solutions_dir = Path(args.solutions_dir) if args.solutions_dir else (
            Path("solutions") / SeriesManifest.load(manifest_path).series_name
        )
        incumbent_dir = os.environ.get(INCUMBENT_DIR_ENV)
        time_limit = os.environ.get(TIME_LIMIT_ENV)
        serve_protocol(
            manifest_path,
            backend,
            solutions_dir,
            config,
            incumbent_dir=Path(incumbent_dir) if incumbent_dir else None,
            time_limit=float(time_limit) if time_limit else None,
        )
    except ReoptBenchError as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        sys.exit(e.exit_code)


if __name__ == "__main__":
    main()
