"""Tests for series generation: streams, similarity, recipes and selection."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from reoptbench.config import GenerationConfig
from reoptbench.errors import (
    InsufficientCandidatesError,
    RecipeInapplicableError,
    StructuralError,
    UndefinedSimilarityError,
)
from reoptbench.model.feasibility import check_feasibility
from reoptbench.model.instance import Component, Instance, Row, Solution, VarKind, Variable
from reoptbench.model.variation import VariationMask, diff_instances
from reoptbench.mps.writer import write_mps
from reoptbench.simgen.recipes import (
    GeneratorSpec,
    Recipe,
    fix_binaries,
    fixable_binaries,
    perturb_bounds,
    perturb_objective,
    perturb_sides,
    perturb_sides_and_objective,
    rhs_convex_combination,
)
from reoptbench.simgen.rng import SplitMix64
from reoptbench.simgen.series import (
    CandidateRecord,
    assemble_series,
    check_series,
    generate_series,
    series_time_limit,
    write_series,
)
from reoptbench.simgen.similarity import similarity, similarity_profile
from reoptbench.simgen.synthetic import gen_synthetic_semicontinuous


def integer_fixture(n: int = 20) -> Instance:
    return Instance(
        name="ints",
        variables=tuple(
            Variable(f"n{j}", VarKind.GENERAL_INTEGER, 0.0, 10.0, float(j + 1)) for j in range(n)
        ),
        rows=(Row("cap", tuple((j, 1.0) for j in range(n)), -math.inf, 50.0),),
    )


def binary_fixture(n: int) -> Instance:
    return Instance(
        name="bins",
        variables=tuple(Variable(f"y{j}", VarKind.BINARY, 0.0, 1.0, 1.0) for j in range(n)),
        rows=(Row("card", tuple((j, 1.0) for j in range(n)), 1.0, math.inf),),
    )


def sides_fixture() -> Instance:
    return Instance(
        name="sides",
        variables=(Variable("x", objective_coefficient=3.0), Variable("y", objective_coefficient=-2.0)),
        rows=(
            Row("big", ((0, 1.0),), -math.inf, 100.0),
            Row("neg", ((1, 1.0),), -5.0, math.inf),
            Row("both", ((0, 1.0), (1, 1.0)), 10.0, 40.0),
            Row("eq", ((0, 2.0), (1, 1.0)), 6.0, 6.0),
        ),
    )


# --- random streams -----------------------------------------------------------

def test_streams_are_reproducible_and_distinct():
    a = [SplitMix64.stream(42, "tag", 0).next_u64() for _ in range(2)]
    assert a[0] == a[1]
    assert SplitMix64.stream(42, "tag", 0).next_u64() != SplitMix64.stream(42, "tag", 1).next_u64()
    assert SplitMix64.stream(42, "tag", 0).next_u64() != SplitMix64.stream(43, "tag", 0).next_u64()


def test_splitmix64_reference_value():
    # Reference output of splitmix64 seeded with 0
    assert SplitMix64(0).next_u64() == 0xE220A8397B1DCDAF


def test_draw_ranges():
    rng = SplitMix64.stream(1, "ranges", 0)
    for _ in range(1000):
        assert 0.0 <= rng.uniform() < 1.0
        assert 3 <= rng.randint(3, 5) <= 5
    assert sorted(rng.sample(range(10), 10)) == list(range(10))
    with pytest.raises(ValueError):
        rng.randint(2, 1)


# --- similarity ---------------------------------------------------------------

@pytest.mark.parametrize(
    "c, c_bar, expected",
    [
        ((3.0, 4.0), (3.0, 4.0), 1.0),
        ((1.0, 0.0), (0.0, 1.0), 0.0),
        ((1.0, -2.0), (-1.0, 2.0), -1.0),
    ],
)
def test_similarity_values(c, c_bar, expected):
    assert similarity(c, c_bar) == pytest.approx(expected)


def test_similarity_errors():
    with pytest.raises(UndefinedSimilarityError):
        similarity((0.0, 0.0), (1.0, 2.0))
    with pytest.raises(StructuralError):
        similarity((1.0,), (1.0, 2.0))


def test_similarity_profile_starts_at_one():
    base = integer_fixture(5)
    series = [base] + [perturb_objective(base, 0.05, 2, 0.1, seed=3, index=k) for k in range(3)]
    profile = similarity_profile(series, VariationMask.of("OBJ"))
    assert profile[0] == pytest.approx(1.0)
    assert all(s is not None and s <= 1.0 for s in profile)


# --- recipes ------------------------------------------------------------------

def test_bound_perturbation_stays_integral_in_range():
    base = integer_fixture()
    for index in range(20):
        instance = perturb_bounds(base, 1.0, seed=5, index=index)
        for var in instance.variables:
            assert var.upper == int(var.upper)
            assert 0.0 <= var.upper <= 20.0
        assert diff_instances(base, instance).outside(VariationMask.of("UP")) == frozenset()


def test_bound_perturbation_is_deterministic():
    base = integer_fixture()
    first = write_mps(perturb_bounds(base, 1.0, seed=11, index=4))
    second = write_mps(perturb_bounds(base, 1.0, seed=11, index=4))
    assert first == second


def test_bound_perturbation_needs_integers(knapsack):
    with pytest.raises(RecipeInapplicableError):
        perturb_bounds(knapsack, 1.0, seed=0)


def test_binary_fix_forced_count():
    base = binary_fixture(10)
    instance = fix_binaries(base, 0.2, 0.2, seed=1)
    fixed = [v for v in instance.variables if v.lower == v.upper]
    assert len(fixed) == 2


def test_binary_fix_zero_fraction_is_identity():
    base = binary_fixture(10)
    assert fix_binaries(base, 0.0, 0.0, seed=1) == base


def test_binary_fix_count_support():
    base = binary_fixture(100)
    counts = set()
    for index in range(200):
        instance = fix_binaries(base, 0.15, 0.25, seed=9, index=index)
        counts.add(sum(1 for v in instance.variables if v.lower == v.upper))
    assert counts <= set(range(15, 26))
    assert len(counts) > 3


def test_binary_fix_counts_integer_columns_bounded_to_zero_one():
    variables = (
        Variable("b", VarKind.BINARY, 0.0, 1.0, 1.0),
        Variable("i01", VarKind.GENERAL_INTEGER, 0.0, 1.0, 1.0),
        Variable("fixed", VarKind.BINARY, 1.0, 1.0, 1.0),
        Variable("i03", VarKind.GENERAL_INTEGER, 0.0, 3.0, 1.0),
        Variable("x", VarKind.CONTINUOUS, 0.0, 1.0, 1.0),
    )
    base = Instance(name="mixed", variables=variables)
    assert fixable_binaries(base) == [0, 1]

    instance = fix_binaries(base, 1.0, 1.0, seed=4)
    assert all(v.lower == v.upper for v in instance.variables[:3])
    assert instance.variables[3] == variables[3]
    assert instance.variables[4] == variables[4]


def test_binary_fix_needs_binaries(small_lp):
    with pytest.raises(RecipeInapplicableError):
        fix_binaries(small_lp, 0.1, 0.2, seed=0)


def test_objective_identity_without_noise_or_rotation():
    base = integer_fixture(6)
    assert list(perturb_objective(base, 0.0, 0, 0.1, seed=2).objective) == list(base.objective)


def test_rotations_preserve_norm():
    base = integer_fixture(6)
    rotated = perturb_objective(base, 0.0, 10, 0.5, seed=2)
    assert np.linalg.norm(rotated.objective) == pytest.approx(np.linalg.norm(base.objective), rel=1e-9)


def test_default_objective_perturbation_stays_similar():
    base = integer_fixture(20)
    for index in range(10):
        perturbed = perturb_objective(base, 0.05, 10, 0.1, seed=8, index=index)
        assert similarity(perturbed.objective, base.objective) >= 0.9


def test_zero_objective_is_inapplicable(small_lp):
    zero = small_lp.replace(variables=tuple(
        Variable(v.name, v.kind, v.lower, v.upper, 0.0) for v in small_lp.variables
    ))
    with pytest.raises(RecipeInapplicableError):
        perturb_objective(zero, 0.05, 1, 0.1, seed=0)


def test_rhs_convex_endpoint_and_midpoint():
    base = Instance(
        name="two_rows",
        variables=(Variable("x"),),
        rows=(Row("r1", ((0, 1.0),), -math.inf, 1.0), Row("r2", ((0, 1.0),), -math.inf, 1.0)),
    )
    assert list(rhs_convex_combination(base, (2.0, 4.0), (4.0, 8.0), 1.0).rhs) == [2.0, 4.0]
    assert list(rhs_convex_combination(base, (2.0, 4.0), (4.0, 8.0), 0.5).rhs) == [3.0, 6.0]
    with pytest.raises(StructuralError):
        rhs_convex_combination(base, (2.0,), (4.0, 8.0), 0.5)


def test_rhs_similarity_decreases_with_lambda_distance():
    base, rhs_a, rhs_b = gen_synthetic_semicontinuous(n=4, m=6, seed=3)
    grid = [k / 49 for k in range(50)]
    series = [rhs_convex_combination(base, rhs_a, rhs_b, lam) for lam in grid]
    mask = VariationMask.of("RHS")
    profile = similarity_profile(series, mask)
    # Similarity to lambda = 0 is non-increasing as lambda moves away from it
    assert all(b <= a + 1e-12 for a, b in zip(profile, profile[1:]))


def test_side_perturbation_range_and_eligibility():
    base = sides_fixture()
    for index in range(20):
        instance = perturb_sides(base, 0.7, seed=4, index=index)
        big = instance.rows[0]
        assert 30.0 - 1e-9 <= big.rhs <= 170.0 + 1e-9
        assert instance.rows[1].lhs == -5.0
        assert instance.rows[3].lhs == instance.rows[3].rhs
        assert all(row.lhs <= row.rhs for row in instance.rows)
        assert list(instance.objective) == list(base.objective)


def test_side_perturbation_is_continuous_in_its_parameter():
    base = sides_fixture()
    instance = perturb_sides(base, 1e-12, seed=4)
    for row, original in zip(instance.rows, base.rows):
        assert row.rhs == pytest.approx(original.rhs, abs=1e-9)


def test_side_and_objective_perturbation_stays_in_mask():
    base = sides_fixture()
    instance = perturb_sides_and_objective(base, 0.2, seed=6)
    assert diff_instances(base, instance).outside(VariationMask.of("OBJ", "LHS", "RHS")) == frozenset()


# --- synthetic family ---------------------------------------------------------

def test_synthetic_smallest_structure():
    instance, rhs_a, rhs_b = gen_synthetic_semicontinuous(n=1, m=1, seed=123)
    assert instance.num_variables == 2
    assert instance.num_rows == 3
    assert len(rhs_a) == len(rhs_b) == 3


def test_synthetic_zero_solution_satisfies_linking_rows():
    instance, _, _ = gen_synthetic_semicontinuous(n=5, m=3, seed=1)
    zero = Solution.of([0.0] * instance.num_variables)
    activity = instance.matrix @ zero.as_array()
    for row, value in zip(instance.rows, activity):
        if row.name.startswith(("lo", "up")):
            assert value == 0.0 <= row.rhs


def test_synthetic_rhs_streams_share_structure():
    first, a0, _ = gen_synthetic_semicontinuous(n=3, m=2, seed=5, rhs_stream=0)
    second, a1, _ = gen_synthetic_semicontinuous(n=3, m=2, seed=5, rhs_stream=1)
    assert first.variables == second.variables
    assert [r.coefficients for r in first.rows] == [r.coefficients for r in second.rows]
    assert a0 != a1
    assert list(first.rhs) == a0


def test_synthetic_optimum_matches_brute_force():
    from itertools import product

    from reoptbench.backends.oracle import enumerate_solve

    instance, _, _ = gen_synthetic_semicontinuous(n=6, m=3, seed=21, objective_range=(-10.0, -1.0), rhs_range=(5.0, 30.0))
    n = 6
    links = []
    for j in range(n):
        lo = next(r for r in instance.rows if r.name == f"lo{j + 1}")
        up = next(r for r in instance.rows if r.name == f"up{j + 1}")
        low = dict(lo.coefficients).get(n + j, 0.0)
        high = -dict(up.coefficients).get(n + j, 0.0)
        links.append((low, high))

    best = math.inf
    for y in product([0, 1], repeat=n):
        choices = [[0.0] if not y[j] else [links[j][0], links[j][1]] for j in range(n)]
        for x in product(*choices):
            solution = Solution.of(list(x) + [float(v) for v in y])
            if check_feasibility(instance, solution).feasible:
                best = min(best, float(np.dot(instance.objective, solution.as_array())))

    result = enumerate_solve(instance, 60.0)
    assert result.outcome.solved_to_optimality
    assert result.outcome.primal_bound == pytest.approx(best)


# --- selection and series -----------------------------------------------------

def _candidates(times, sims):
    base = integer_fixture(3)
    return [
        CandidateRecord(base.replace(name=f"c{k}", objective_constant=float(k)), t, s)
        for k, (t, s) in enumerate(zip(times, sims))
    ]


def test_selection_keeps_generation_order():
    candidates = _candidates([1.0] * 60, [0.9] * 60)
    manifest, instances = assemble_series(candidates, target=50, mask=VariationMask.of("UP"))
    assert len(instances) == 50
    assert manifest.instance_files[0] == "01.mps"
    assert manifest.instance_files[-1] == "50.mps"
    assert [i.name for i in instances][:2] == ["series_01", "series_02"]


def test_vacuous_bands_never_reject():
    candidates = _candidates([float(k) for k in range(50)], [0.5] * 50)
    manifest, instances = assemble_series(
        candidates, target=50, time_band=(0.0, math.inf), similarity_band=(-1.0, 1.0),
        mask=VariationMask.of("UP"),
    )
    assert len(instances) == 50


def test_selection_matches_filter_then_truncate():
    rng = SplitMix64.stream(17, "selection-test", 0)
    times = [rng.uniform_range(0.0, 20.0) for _ in range(100)]
    sims = [rng.uniform_range(0.0, 1.0) for _ in range(100)]
    candidates = _candidates(times, sims)
    time_band, similarity_band = (2.0, 15.0), (0.3, 1.0)

    expected = [
        k for k, (t, s) in enumerate(zip(times, sims))
        if time_band[0] <= t <= time_band[1] and similarity_band[0] <= s <= similarity_band[1]
    ]
    target = min(20, len(expected))
    _, instances = assemble_series(
        candidates, target=target, time_band=time_band, similarity_band=similarity_band,
        mask=VariationMask.of("UP"),
    )
    assert [int(i.objective_constant) for i in instances] == expected[:target]


def test_too_few_candidates_names_band():
    candidates = _candidates([100.0] * 10 + [1.0] * 5, [0.9] * 15)
    with pytest.raises(InsufficientCandidatesError) as excinfo:
        assemble_series(candidates, target=10, time_band=(0.0, 10.0), mask=VariationMask.of("UP"))
    assert excinfo.value.band == "time"
    assert excinfo.value.qualifying == 5


def test_unknown_time_fails_a_time_band():
    candidates = _candidates([None] * 5, [0.9] * 5)
    with pytest.raises(InsufficientCandidatesError):
        assemble_series(candidates, target=5, time_band=(0.0, 10.0), mask=VariationMask.of("UP"))


def test_series_time_limit_rounding():
    config = GenerationConfig(time_limit_multiplier=2.0, time_limit_granularity=10.0)
    assert series_time_limit([12.0, 14.0, 200.0], 600.0, config) == 30.0
    assert series_time_limit([0.001], 600.0, config) == 10.0
    assert series_time_limit([None, None], 600.0, config) == 600.0


def test_generator_spec_validation():
    spec = GeneratorSpec(recipe=Recipe.BINARY_FIX, parameters={"fraction_low": 0.1}, seed=1)
    assert spec.parameters == {"fraction_low": 0.1, "fraction_high": 0.25}
    assert spec.mask.to_list() == ["LO", "UP"]
    with pytest.raises(ValidationError):
        GeneratorSpec(recipe=Recipe.BINARY_FIX, parameters={"unknown": 1}, seed=1)
    with pytest.raises(ValidationError):
        GeneratorSpec(recipe=Recipe.SIDE_PERTURB, parameters={"max_relative_change": 1.5}, seed=1)
    with pytest.raises(ValidationError):
        GeneratorSpec(recipe=Recipe.SIDE_PERTURB, seed=1, candidate_count=10, series_length=50)


def test_generated_series_passes_check(series_dir):
    report = check_series(series_dir, expected_length=3)
    assert report.ok, report.problems
    assert report.instance_count == 3
    assert not report.notes


def test_check_series_flags_changes_outside_the_mask(tmp_path, synthetic_spec):
    manifest, instances = generate_series(synthetic_spec, series_name="bad", default_time_limit=30.0)
    tampered = instances[1].replace(variables=tuple(
        Variable(v.name, v.kind, v.lower, v.upper, v.objective_coefficient + 1.0) for v in instances[1].variables
    ))
    path = write_series(tmp_path / "bad", manifest, [instances[0], tampered, instances[2]])
    report = check_series(path, expected_length=3)
    assert not report.ok
    assert any("OBJ" in problem for problem in report.problems)


def test_regeneration_is_byte_identical(tmp_path, synthetic_spec):
    paths = []
    for name in ("first", "second"):
        manifest, instances = generate_series(synthetic_spec, series_name="same", default_time_limit=30.0)
        paths.append(write_series(tmp_path / name, manifest, instances))
    for a, b in zip(sorted(paths[0].parent.iterdir()), sorted(paths[1].parent.iterdir())):
        assert a.read_bytes() == b.read_bytes()


def test_generated_synthetic_series_varies_only_rhs(synthetic_spec):
    manifest, instances = generate_series(synthetic_spec, series_name="rhs", default_time_limit=30.0)
    assert manifest.variation_mask == ["RHS"]
    for instance in instances[1:]:
        assert diff_instances(instances[0], instance).changed <= frozenset({Component.RHS})
