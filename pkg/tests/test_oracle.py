"""Tests for the enumeration oracle and the external solver adapter."""

import math

import pytest

from reoptbench.backends.external import ExternalBackend, parse_result_line
from reoptbench.backends.oracle import EnumerationBackend, check_enumerable, enumerate_solve
from reoptbench.config import OracleConfig
from reoptbench.errors import BackendError, CapabilityError, StructuralError
from reoptbench.model.feasibility import check_feasibility
from reoptbench.model.instance import Instance, Row, Solution, VarKind, Variable
from reoptbench.schemas import RunStatus
from reoptbench.simgen.synthetic import gen_synthetic_semicontinuous


def test_knapsack_optimum(knapsack):
    result = enumerate_solve(knapsack, 10.0)
    assert result.status is RunStatus.OPTIMAL
    assert result.outcome.solved_to_optimality
    assert result.outcome.primal_bound == 12.0
    assert result.outcome.dual_bound == 12.0
    assert result.solution.values == (0.0, 1.0, 1.0, 1.0)


def test_backend_wrapper(knapsack):
    result = EnumerationBackend().solve(knapsack, 10.0)
    assert result.outcome.primal_bound == 12.0


def test_infeasible_instance_is_proven():
    instance = Instance(
        name="infeasible",
        variables=(Variable("a", VarKind.BINARY, 0.0, 1.0, 1.0),),
        rows=(Row("r", ((0, 1.0),), 2.0, math.inf),),
    )
    result = enumerate_solve(instance, 10.0)
    assert result.status is RunStatus.TIMEOUT_NOFEAS
    assert result.solution is None
    assert result.outcome.dual_bound == math.inf


def test_unbounded_integer_is_not_enumerable():
    instance = Instance(name="open", variables=(Variable("n", VarKind.GENERAL_INTEGER, 0.0, math.inf, 1.0),))
    with pytest.raises(CapabilityError):
        check_enumerable(instance)


def test_unlinked_continuous_is_not_enumerable(small_lp):
    with pytest.raises(CapabilityError):
        check_enumerable(small_lp)


def test_domain_cap(knapsack):
    assert check_enumerable(knapsack, domain_cap=16).size == 16
    with pytest.raises(CapabilityError):
        check_enumerable(knapsack, domain_cap=8)
    with pytest.raises(CapabilityError):
        enumerate_solve(knapsack, 10.0, config=OracleConfig(domain_cap=8))


def test_semicontinuous_solution_is_feasible():
    instance, _, _ = gen_synthetic_semicontinuous(n=3, m=2, seed=9, rhs_range=(5.0, 30.0))
    result = enumerate_solve(instance, 30.0, config=OracleConfig(batch_size=7))
    assert result.status is RunStatus.OPTIMAL
    assert check_feasibility(instance, result.solution).feasible


def test_batch_size_does_not_change_the_answer(knapsack):
    small = enumerate_solve(knapsack, 10.0, config=OracleConfig(batch_size=3))
    large = enumerate_solve(knapsack, 10.0, config=OracleConfig(batch_size=4096))
    assert small.solution == large.solution


def test_cutoff_at_optimum_finds_nothing(knapsack):
    result = enumerate_solve(knapsack, 10.0, cutoff=12.0)
    assert result.status is RunStatus.TIMEOUT_NOFEAS
    assert result.solution is None
    assert result.outcome.dual_bound == 12.0


def test_cutoff_below_optimum_still_finds_it(knapsack):
    result = enumerate_solve(knapsack, 10.0, cutoff=11.5)
    assert result.outcome.primal_bound == 12.0


def test_optimal_warm_start_is_kept(knapsack):
    warm = Solution.of([0.0, 1.0, 1.0, 1.0])
    result = enumerate_solve(knapsack, 10.0, warm_start=warm)
    assert result.solution == warm
    assert result.status is RunStatus.OPTIMAL


def test_zero_time_limit_returns_the_warm_start(knapsack):
    warm = Solution.of([1.0, 0.0, 0.0, 1.0])
    result = enumerate_solve(knapsack, 0.0, warm_start=warm)
    assert result.status is RunStatus.TIMEOUT_INCUMBENT
    assert result.solution == warm
    assert result.outcome.primal_bound == 9.0
    assert result.outcome.dual_bound == math.inf


def test_zero_time_limit_without_warm_start(knapsack):
    result = enumerate_solve(knapsack, 0.0)
    assert result.status is RunStatus.TIMEOUT_NOFEAS
    assert not result.outcome.has_feasible_solution


def test_infeasible_warm_start_is_ignored(knapsack):
    result = enumerate_solve(knapsack, 10.0, warm_start=Solution.of([1.0, 1.0, 1.0, 1.0]))
    assert result.outcome.primal_bound == 12.0


def test_warm_start_length_must_match(knapsack):
    with pytest.raises(StructuralError):
        enumerate_solve(knapsack, 10.0, warm_start=Solution.of([1.0]))


# External adapter

def test_parse_result_line_takes_the_last_one():
    stdout = "log line\nRESULT timeout_nofeas - - -\nRESULT optimal 3.5 3.5 /tmp/x.sol\n"
    assert parse_result_line(stdout) == (RunStatus.OPTIMAL, 3.5, 3.5, "/tmp/x.sol")


@pytest.mark.parametrize(
    "stdout",
    ["", "no result here\n", "RESULT optimal 1 1\n", "RESULT done 1 1 -\n", "RESULT optimal x 1 -\n"],
)
def test_parse_result_line_errors(stdout):
    with pytest.raises(BackendError):
        parse_result_line(stdout)


def test_external_result_mapping():
    solution = Solution.of([1.0])
    result = ExternalBackend._result(RunStatus.TIMEOUT_INCUMBENT, 4.0, 2.0, solution, 1.0, 10.0)
    assert result.status is RunStatus.TIMEOUT_INCUMBENT
    assert result.outcome.has_feasible_solution
    assert result.solution == solution

    empty = ExternalBackend._result(RunStatus.OPTIMAL, None, None, None, 1.0, 10.0)
    assert empty.status is RunStatus.TIMEOUT_NOFEAS
    assert not empty.outcome.solved_to_optimality

    with pytest.raises(BackendError):
        ExternalBackend._result(RunStatus.ERROR, None, None, None, 1.0, 10.0)


def test_external_backend_runs_the_solve_command(knapsack, tmp_path, subprocess_env):
    backend = ExternalBackend([subprocess_env, "-m", "reoptbench.cli", "solve", "--no-artifacts"])
    result = backend.solve(knapsack, 30.0, warm_start=Solution.of([0.0, 0.0, 0.0, 1.0]))
    assert result.status is RunStatus.OPTIMAL
    assert result.outcome.primal_bound == 12.0
    assert result.solution == Solution.of([0.0, 1.0, 1.0, 1.0])


def test_external_backend_needs_a_command():
    with pytest.raises(BackendError):
        ExternalBackend("")
