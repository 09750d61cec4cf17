"""Tests for the reoptimizing baseline: incumbent carrying and the protocol loop."""

import io
import math

import pytest

from reoptbench.backends.base import Backend, BackendResult
from reoptbench.backends.external import ExternalBackend
from reoptbench.backends.oracle import EnumerationBackend
from reoptbench.config import Config, ReoptConfig
from reoptbench.errors import BackendError, StructuralError
from reoptbench.harness.protocol import parse_event_line, validate_event_log
from reoptbench.model.feasibility import objective_value
from reoptbench.model.instance import Solution
from reoptbench.mps.reader import read_mps_file
from reoptbench.reopt import CarryState, PoolEntry, carry_incumbent, get_backend, serve_protocol, solve_reopt
from reoptbench.schemas import EventKind, RunStatus, SeriesManifest, SolveOutcome


class FailingBackend(Backend):
    name = "failing"

    def solve(self, instance, time_limit, warm_start=None, cutoff=None, instance_path=None):
        raise BackendError("solver crashed")


class RecordingBackend(Backend):
    """Returns no solution and remembers what it was given."""
    name = "recording"

    def __init__(self):
        self.calls = []

    def solve(self, instance, time_limit, warm_start=None, cutoff=None, instance_path=None):
        self.calls.append((warm_start, cutoff))
        outcome = SolveOutcome(time_spent_seconds=time_limit, time_limit_seconds=time_limit)
        return BackendResult(outcome=outcome, solution=None, status=RunStatus.TIMEOUT_NOFEAS)


class FixedBackend(Backend):
    """Always answers with the given solution as optimal."""
    name = "fixed"

    def __init__(self, solution: Solution):
        self.solution = solution

    def solve(self, instance, time_limit, warm_start=None, cutoff=None, instance_path=None):
        value = objective_value(instance, self.solution)
        outcome = SolveOutcome(
            time_spent_seconds=0.0,
            time_limit_seconds=time_limit,
            solved_to_optimality=True,
            primal_bound=value,
            dual_bound=value,
            has_feasible_solution=True,
        )
        return BackendResult(outcome=outcome, solution=self.solution, status=RunStatus.OPTIMAL)


class CutoffProofBackend(Backend):
    """Proves nothing beats the cutoff and returns no solution, like `RESULT optimal - <cutoff> -`."""
    name = "cutoff-proof"

    def __init__(self, dual_bound=None):
        self.dual_bound = dual_bound

    def solve(self, instance, time_limit, warm_start=None, cutoff=None, instance_path=None):
        db = cutoff if self.dual_bound is None else self.dual_bound
        return ExternalBackend._result(RunStatus.OPTIMAL, None, db, None, 0.5, time_limit)


def pool(*entries):
    return CarryState(pool=tuple(
        PoolEntry(Solution.of(values), 0.0, k) for k, values in enumerate(entries)
    ))


def test_empty_state_carries_nothing(knapsack):
    assert carry_incumbent(CarryState(), knapsack) is None


def test_carry_picks_best_feasible_solution(knapsack):
    state = pool(
        [1.0, 1.0, 1.0, 1.0],  # infeasible: weight 8
        [1.0, 0.0, 0.0, 1.0],  # value 9
        [0.0, 1.0, 1.0, 0.0],  # value 9
        [1.0, 1.0, 0.0, 0.0],  # value 11
    )
    assert carry_incumbent(state, knapsack) == Solution.of([1.0, 1.0, 0.0, 0.0])


def test_carry_ties_go_to_the_most_recent(knapsack):
    state = pool([1.0, 0.0, 0.0, 1.0], [0.0, 1.0, 1.0, 0.0])
    assert carry_incumbent(state, knapsack) == Solution.of([1.0, 0.0, 0.0, 1.0])


def test_carry_skips_infeasible_pool(knapsack):
    assert carry_incumbent(pool([1.0, 1.0, 1.0, 1.0]), knapsack) is None


def test_carry_rejects_dimension_mismatch(knapsack):
    with pytest.raises(StructuralError):
        carry_incumbent(pool([1.0, 0.0]), knapsack)


def test_first_solve_fills_the_pool(knapsack):
    result, state = solve_reopt(CarryState(), knapsack, 10.0, EnumerationBackend())
    assert result.status is RunStatus.OPTIMAL
    assert result.outcome.primal_bound == 12.0
    assert state.pool[0].solution == Solution.of([0.0, 1.0, 1.0, 1.0])
    assert state.previous_instance == knapsack
    assert state.best_history == (12.0,)
    assert list(state.fixing_frequencies()) == [0.0, 1.0, 1.0, 1.0]


def test_warm_start_and_cutoff_reach_the_backend(knapsack):
    backend = RecordingBackend()
    state = pool([1.0, 0.0, 0.0, 1.0])
    result, new_state = solve_reopt(state, knapsack, 1.0, backend, ReoptConfig(cutoff_slack=0.5))
    warm, cutoff = backend.calls[0]
    assert warm == Solution.of([1.0, 0.0, 0.0, 1.0])
    # maximizing: the cutoff sits just below the warm objective
    assert cutoff == 8.5
    # the backend found nothing, so the warm solution is reported
    assert result.status is RunStatus.TIMEOUT_INCUMBENT
    assert result.solution == warm
    assert result.outcome.primal_bound == 9.0
    assert new_state.best_history == (9.0,)


def test_result_never_worse_than_warm_start(series_dir):
    manifest = SeriesManifest.load(series_dir)
    instances = [read_mps_file(p) for p in manifest.instance_paths(series_dir)]
    state = CarryState()
    backend = EnumerationBackend()
    for instance in instances:
        warm = carry_incumbent(state, instance)
        result, state = solve_reopt(state, instance, 10.0, backend)
        if warm is not None:
            assert result.outcome.has_feasible_solution
            assert result.outcome.primal_bound <= objective_value(instance, warm) + 1e-9


def test_backend_failure_keeps_the_state(knapsack):
    state = pool([1.0, 0.0, 0.0, 1.0])
    result, new_state = solve_reopt(state, knapsack, 5.0, FailingBackend())
    assert result.status is RunStatus.ERROR
    assert result.solution is None
    assert new_state is state


def test_pool_size_is_capped(knapsack):
    state = CarryState()
    config = ReoptConfig(pool_size=2)
    for values in ([0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 0.0]):
        backend = FixedBackend(Solution.of(values))
        _, state = solve_reopt(state, knapsack, 1.0, backend, config)
    assert len(state.pool) == 2
    assert state.pool[0].solution == Solution.of([0.0, 1.0, 0.0, 0.0])


def test_serve_protocol_emits_a_conforming_log(series_dir, tmp_path):
    out = io.StringIO()
    incumbents = tmp_path / "incumbents"
    state = serve_protocol(series_dir, EnumerationBackend(), tmp_path / "solutions", Config(), out,
                           incumbent_dir=incumbents)
    lines = out.getvalue().splitlines()
    events = [parse_event_line(line, k + 1) for k, line in enumerate(lines)]
    assert validate_event_log(events, 3) == []
    assert events[0].kind is EventKind.SERIES_START
    assert events[-1].kind is EventKind.SERIES_END
    assert len(state.best_history) == 3
    for event in events:
        if event.kind is EventKind.INSTANCE_END and event.solution_path is not None:
            assert event.solution_path.endswith(f"{event.instance_index:02d}.sol")


def test_get_backend():
    config = Config()
    assert isinstance(get_backend("oracle", config), EnumerationBackend)
    backend = get_backend("exec:my-solver --threads 1", config)
    assert isinstance(backend, ExternalBackend)
    assert backend.command == ["my-solver", "--threads", "1"]
    with pytest.raises(ValueError):
        get_backend("exec:", config)
    with pytest.raises(ValueError):
        get_backend("gurobi", config)


def test_cutoff_proof_confirms_the_warm_solution_optimal(knapsack):
    _, state = solve_reopt(CarryState(), knapsack, 10.0, FixedBackend(Solution.of([0.0, 1.0, 1.0, 1.0])))
    result, state = solve_reopt(state, knapsack, 10.0, CutoffProofBackend())
    assert result.status is RunStatus.OPTIMAL
    assert result.solution == Solution.of([0.0, 1.0, 1.0, 1.0])
    assert result.outcome.solved_to_optimality
    assert result.outcome.primal_bound == 12.0
    assert result.outcome.dual_bound == 12.0
    assert state.best_history == (12.0, 12.0)


def test_cutoff_proof_with_a_wide_slack(knapsack):
    state = pool([1.0, 0.0, 0.0, 1.0])
    result, _ = solve_reopt(state, knapsack, 10.0, CutoffProofBackend(), ReoptConfig(cutoff_slack=0.5))
    assert result.status is RunStatus.OPTIMAL
    assert result.outcome.dual_bound == 9.0


def test_dual_bound_beyond_the_warm_value_is_kept(knapsack):
    state = pool([1.0, 0.0, 0.0, 1.0])
    result, _ = solve_reopt(state, knapsack, 10.0, CutoffProofBackend(dual_bound=13.0))
    assert result.status is RunStatus.TIMEOUT_INCUMBENT
    assert not result.outcome.solved_to_optimality
    assert result.outcome.primal_bound == 9.0
    assert result.outcome.dual_bound == 13.0


def test_dual_bound_on_the_wrong_side_is_dropped(knapsack):
    state = pool([1.0, 0.0, 0.0, 1.0])
    result, _ = solve_reopt(state, knapsack, 10.0, CutoffProofBackend(dual_bound=5.0))
    assert result.status is RunStatus.TIMEOUT_INCUMBENT
    assert result.outcome.dual_bound == math.inf
