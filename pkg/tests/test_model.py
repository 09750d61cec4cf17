"""Tests for the instance model: objective, feasibility, variations and solutions."""

import itertools
import math

import numpy as np
import pytest

from reoptbench.errors import ContractViolation, InvalidInputError, StructuralError
from reoptbench.model.feasibility import FeasTolerances, batch_feasible, check_feasibility, objective_value
from reoptbench.model.instance import Component, Instance, Row, Solution, VarKind, Variable
from reoptbench.model.solution import format_solution, parse_solution
from reoptbench.model.variation import (
    VariationDelta,
    VariationMask,
    apply_variation,
    diff_instances,
    varying_vector,
)
from reoptbench.simgen.rng import SplitMix64


def test_objective_of_zero_solution_is_constant(small_lp):
    assert objective_value(small_lp, Solution.of([0.0, 0.0])) == 0.0


def test_objective_direct_arithmetic():
    instance = Instance(
        name="two",
        variables=(Variable("x", objective_coefficient=2.0), Variable("y", objective_coefficient=-1.0)),
    )
    assert objective_value(instance, Solution.of([3.0, 4.0])) == 2.0


def test_objective_matches_enumerated_optimum(knapsack):
    best = max(
        objective_value(knapsack, Solution.of(x))
        for x in itertools.product([0.0, 1.0], repeat=4)
        if check_feasibility(knapsack, Solution.of(x)).feasible
    )
    assert best == 12.0


def test_objective_length_mismatch(small_lp):
    with pytest.raises(StructuralError):
        objective_value(small_lp, Solution.of([1.0]))


def test_solution_at_bounds_with_slack_rows_is_feasible(small_lp):
    report = check_feasibility(small_lp, Solution.of([0.0, 0.0]))
    assert report.feasible
    assert report.max_bound_violation == 0.0
    assert report.max_row_violation == 0.0
    assert report.max_integrality_violation == 0.0


def test_fractional_binary_is_infeasible(knapsack):
    report = check_feasibility(knapsack, Solution.of([0.5, 0.0, 0.0, 0.0]))
    assert not report.feasible
    assert report.max_integrality_violation == pytest.approx(0.5)


def test_row_violation_is_scaled(small_lp):
    # x + 2y = 12 against rhs 10: violation 2 / (1 + 10)
    report = check_feasibility(small_lp, Solution.of([0.0, 6.0]))
    assert not report.feasible
    assert report.max_row_violation == pytest.approx(2.0 / 11.0)
    assert report.worst_offender == "c1"


def test_nan_solution_rejected(small_lp):
    with pytest.raises(InvalidInputError):
        check_feasibility(small_lp, Solution.of([math.nan, 0.0]))


def test_zero_tolerances_accept_an_exact_solution(knapsack):
    report = check_feasibility(knapsack, Solution.of([0.0, 1.0, 1.0, 1.0]), FeasTolerances(0.0, 0.0, 0.0))
    assert report.feasible
    assert report.worst_offender is None


def test_zero_tolerance_names_the_violated_row(small_lp):
    report = check_feasibility(small_lp, Solution.of([0.0, 6.0]), FeasTolerances(row=0.0))
    assert not report.feasible
    assert report.worst_offender == "c1"


@pytest.mark.parametrize("field", ["row", "bound", "integrality"])
def test_negative_tolerance_rejected(field):
    with pytest.raises(InvalidInputError):
        FeasTolerances(**{field: -1e-9})


def test_feasibility_is_monotone_in_tolerance():
    rng = SplitMix64.stream(11, "tolerance-monotone", 0)
    variables = tuple(
        Variable(f"x{j}", VarKind.GENERAL_INTEGER if j % 2 else VarKind.CONTINUOUS, -2.0, 3.0, 1.0)
        for j in range(3)
    )
    rows = (
        Row("r0", ((0, 1.0), (1, 1.0), (2, -1.0)), -2.0, 2.0),
        Row("r1", ((0, 0.5), (2, 2.0)), -math.inf, 3.0),
    )
    instance = Instance(name="mono", variables=variables, rows=rows)
    levels = (0.0, 1e-7, 1e-6, 1e-5, 1e-3, 0.1, 1.0)

    for _ in range(200):
        # half-integral values keep some solutions exactly feasible at zero tolerance
        x = Solution.of([rng.randint(-6, 8) * 0.5 + rng.uniform_range(-1e-6, 1e-6) * rng.randint(0, 1)
                         for _ in range(3)])
        low, high = sorted(rng.sample(range(len(levels)), 2))
        tight = FeasTolerances(levels[low], levels[low], levels[low])
        loose = FeasTolerances(levels[high], levels[high], levels[high])
        if check_feasibility(instance, x, tight).feasible:
            assert check_feasibility(instance, x, loose).feasible
        if check_feasibility(instance, x, FeasTolerances(0.0, 0.0, 0.0)).feasible:
            assert check_feasibility(instance, x).feasible


def test_batch_feasibility_matches_dense_recheck():
    rng = SplitMix64.stream(3, "feasibility-test", 0)
    variables = tuple(
        Variable(f"x{j}", VarKind.GENERAL_INTEGER if j % 2 else VarKind.CONTINUOUS, -2.0, 3.0, 1.0)
        for j in range(4)
    )
    rows = tuple(
        Row(f"r{i}", tuple((j, rng.uniform_range(-2.0, 2.0) or 1.0) for j in range(4)), -4.0, 4.0)
        for i in range(3)
    )
    instance = Instance(name="random", variables=variables, rows=rows)
    A = instance.matrix.toarray()

    X = np.array([[rng.randint(-3, 4) * 0.5 for _ in range(4)] for _ in range(100)])
    flags = batch_feasible(instance, X)
    for x, flag in zip(X, flags):
        activity = A @ x
        rows_ok = all(
            max(row.lhs - a, a - row.rhs, 0.0) / (1.0 + 4.0) <= 1e-6
            for row, a in zip(rows, activity)
        )
        bounds_ok = all(
            max(v.lower - value, value - v.upper, 0.0) / (1.0 + abs(v.upper if value > v.upper else v.lower)) <= 1e-6
            for v, value in zip(variables, x)
        )
        integral = all(
            abs(value - round(value)) <= 1e-5
            for v, value in zip(variables, x) if v.is_integer
        )
        assert bool(flag) == (rows_ok and bounds_ok and integral)
        assert bool(flag) == check_feasibility(instance, Solution.of(x)).feasible


def test_instance_rejects_inverted_bounds():
    with pytest.raises(StructuralError):
        Variable("x", lower=2.0, upper=1.0)


def test_instance_rejects_duplicate_names():
    with pytest.raises(StructuralError):
        Instance(name="dup", variables=(Variable("x"), Variable("x")))


def test_row_rejects_bad_index():
    with pytest.raises(StructuralError):
        Instance(name="bad", variables=(Variable("x"),), rows=(Row("r", ((3, 1.0),), -math.inf, 1.0),))


def test_empty_delta_is_identity(small_lp):
    assert apply_variation(small_lp, VariationDelta(VariationMask.of("OBJ"))) == small_lp


def test_objective_delta_doubles_coefficients(small_lp):
    doubled = apply_variation(
        small_lp,
        VariationDelta(VariationMask.of("OBJ"), objective=tuple(2 * small_lp.objective)),
    )
    assert list(doubled.objective) == [2.0, -2.0]
    assert doubled.rows == small_lp.rows
    assert list(doubled.lower) == list(small_lp.lower)
    assert diff_instances(small_lp, doubled).changed == frozenset({Component.OBJ})


def test_delta_outside_mask_is_a_contract_violation(small_lp):
    with pytest.raises(ContractViolation):
        apply_variation(small_lp, VariationDelta(VariationMask.of("OBJ"), rhs=(5.0,)))


def test_delta_dimension_mismatch(small_lp):
    with pytest.raises(StructuralError):
        apply_variation(small_lp, VariationDelta(VariationMask.of("RHS"), rhs=(5.0, 6.0)))


def test_diff_reports_structural_mismatch(small_lp, knapsack):
    diff = diff_instances(small_lp, knapsack)
    assert not diff.same_structure


def test_varying_vector_replaces_infinities(small_lp):
    vector = varying_vector(small_lp, VariationMask.of("UP", "RHS"))
    assert list(vector) == [0.0, 0.0, 10.0]


def test_mask_canonical_order():
    assert VariationMask.of("rhs", "LO", "obj").to_list() == ["LO", "OBJ", "RHS"]


def test_solution_text_defaults_missing_to_zero(knapsack):
    solution = parse_solution("# comment\nb 1\n\nd 1\n", knapsack)
    assert solution.values == (0.0, 1.0, 0.0, 1.0)


def test_solution_text_rejects_unknown_and_duplicate(knapsack):
    with pytest.raises(InvalidInputError):
        parse_solution("z 1\n", knapsack)
    with pytest.raises(InvalidInputError):
        parse_solution("a 1\na 0\n", knapsack)


def test_solution_format_parses_back(knapsack):
    solution = Solution.of([0.0, 1.0, 1.0, 1.0])
    assert parse_solution(format_solution(knapsack, solution), knapsack) == solution
