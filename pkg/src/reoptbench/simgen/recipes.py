"""Perturbation recipes turning a base instance into one series candidate.

Every recipe draws from its own splitmix64 stream keyed by
(seed, recipe tag, candidate index) and changes only the components of its
mask. Rounding is half-up: round(x) = floor(x + 0.5).
"""

import math
from enum import Enum
from typing import Any, Dict, FrozenSet, List, Sequence, Tuple

from pydantic import BaseModel, Field, model_validator

from reoptbench.errors import InvalidInputError, RecipeInapplicableError, StructuralError
from reoptbench.model.instance import Component, Instance, Row, VarKind
from reoptbench.model.variation import VariationDelta, VariationMask, apply_variation
from reoptbench.simgen.rng import SplitMix64


class Recipe(str, Enum):
    BOUND_PERTURB = "bound_perturb"
    BINARY_FIX = "binary_fix"
    OBJ_PERTURB_ROTATE = "obj_perturb_rotate"
    RHS_CONVEX = "rhs_convex"
    SIDE_PERTURB = "side_perturb"
    SIDE_OBJ_PERTURB = "side_obj_perturb"
    SYNTHETIC_SEMICONTINUOUS = "synthetic_semicontinuous"


RECIPE_MASKS: Dict[Recipe, FrozenSet[Component]] = {
    Recipe.BOUND_PERTURB: frozenset({Component.UP}),
    Recipe.BINARY_FIX: frozenset({Component.LO, Component.UP}),
    Recipe.OBJ_PERTURB_ROTATE: frozenset({Component.OBJ}),
    Recipe.RHS_CONVEX: frozenset({Component.RHS}),
    Recipe.SIDE_PERTURB: frozenset({Component.LHS, Component.RHS}),
    Recipe.SIDE_OBJ_PERTURB: frozenset({Component.OBJ, Component.LHS, Component.RHS}),
    Recipe.SYNTHETIC_SEMICONTINUOUS: frozenset({Component.RHS}),
}

RECIPE_DEFAULTS: Dict[Recipe, Dict[str, Any]] = {
    Recipe.BOUND_PERTURB: {"max_relative_change": 1.0},
    Recipe.BINARY_FIX: {"fraction_low": 0.15, "fraction_high": 0.25},
    Recipe.OBJ_PERTURB_ROTATE: {"relative_noise": 0.05, "rotation_pairs": 10, "max_angle_radians": 0.1},
    Recipe.RHS_CONVEX: {"rhs_spread": 0.5},
    Recipe.SIDE_PERTURB: {"max_relative_change": 0.7},
    Recipe.SIDE_OBJ_PERTURB: {"max_relative_change": 0.2},
    Recipe.SYNTHETIC_SEMICONTINUOUS: {
        "n": 10,
        "m": 5,
        "rhs_stream": 0,
        "matrix_range": [-10.0, 10.0],
        "matrix_density": 0.2,
        "objective_range": [1.0, 10.0],
        "bound_range": [0.0, 10.0],
        "rhs_range": [-10.0, 30.0],
    },
}

_FRACTIONS = {"fraction_low", "fraction_high", "matrix_density", "max_relative_change"}


class GeneratorSpec(BaseModel):
    """Recipe, parameters and seed of one series generation."""
    recipe: Recipe
    parameters: Dict[str, Any] = Field(default_factory=dict)
    seed: int = Field(ge=0, lt=2 ** 64)
    candidate_count: int = Field(default=50, ge=1)
    series_length: int = Field(default=50, ge=1)

    @model_validator(mode="after")
    def _validate(self) -> "GeneratorSpec":
        if self.candidate_count < self.series_length:
            raise ValueError(
                f"candidate_count {self.candidate_count} is below the series length {self.series_length}"
            )
        defaults = RECIPE_DEFAULTS[self.recipe]
        unknown = set(self.parameters) - set(defaults)
        if unknown:
            raise ValueError(f"unknown parameters for {self.recipe.value}: {sorted(unknown)}")
        merged = dict(defaults)
        merged.update(self.parameters)
        for key, value in merged.items():
            values = value if isinstance(value, (list, tuple)) else [value]
            for v in values:
                if not math.isfinite(float(v)):
                    raise ValueError(f"parameter {key} must be finite")
                if key in _FRACTIONS and not 0.0 <= float(v) <= 1.0:
                    raise ValueError(f"parameter {key} must lie in [0, 1]")
        self.parameters = merged
        return self

    @property
    def mask(self) -> VariationMask:
        return VariationMask(RECIPE_MASKS[self.recipe])


def _stream(recipe: Recipe, seed: int, index: int) -> SplitMix64:
    return SplitMix64.stream(seed, recipe.value, index)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _check_fraction(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise InvalidInputError(f"{name} must lie in [0, 1], got {value}")


def perturb_bounds(base: Instance, max_relative_change: float, seed: int, index: int = 0) -> Instance:
    """Resample upper bounds of general integer variables.

    Each general integer variable with a finite positive upper bound u is
    selected with probability 0.5; its new upper bound is uniform on
    {0, ..., round((1 + max_relative_change) * u)}, raised to the lower bound
    if it falls below it.
    """
    _check_fraction("max_relative_change", max_relative_change)
    eligible = [
        j for j, var in enumerate(base.variables)
        if var.kind is VarKind.GENERAL_INTEGER and math.isfinite(var.upper) and var.upper > 0
    ]
    if not eligible:
        raise RecipeInapplicableError(
            Recipe.BOUND_PERTURB.value, "no general integer variable with a finite positive upper bound"
        )

    rng = _stream(Recipe.BOUND_PERTURB, seed, index)
    upper = list(base.upper)
    for j in eligible:
        if not rng.bernoulli(0.5):
            continue
        var = base.variables[j]
        top = _round_half_up((1.0 + max_relative_change) * var.upper)
        upper[j] = max(float(rng.randint(0, top)), var.lower)

    return apply_variation(base, VariationDelta(VariationMask.of("UP"), upper=tuple(upper)))


def fixable_binaries(base: Instance) -> List[int]:
    """Indices of unfixed binary-domain variables.

    Integer columns bounded to [0, 1] count as binaries, since MPS files
    usually declare binaries as integer marker columns with UP 1.
    """
    return [
        j for j, var in enumerate(base.variables)
        if var.has_binary_domain and var.lower == 0.0 and var.upper == 1.0
    ]


def fix_binaries(
    base: Instance,
    fraction_low: float,
    fraction_high: float,
    seed: int,
    index: int = 0
) -> Instance:
    """Fix a random fraction of the free binaries to random values.

    phi is uniform in [fraction_low, fraction_high], k = round(phi * n) with n
    the number of fixable_binaries; k distinct binaries are chosen without
    replacement and each is fixed to a value drawn uniformly from {0, 1}.
    """
    _check_fraction("fraction_low", fraction_low)
    _check_fraction("fraction_high", fraction_high)
    if fraction_low > fraction_high:
        raise InvalidInputError(f"fraction_low {fraction_low} exceeds fraction_high {fraction_high}")
    binaries = fixable_binaries(base)
    if not binaries:
        raise RecipeInapplicableError(Recipe.BINARY_FIX.value, "the instance has no unfixed binary variables")

    rng = _stream(Recipe.BINARY_FIX, seed, index)
    phi = fraction_low + (fraction_high - fraction_low) * rng.uniform()
    k = min(_round_half_up(phi * len(binaries)), len(binaries))

    lower = list(base.lower)
    upper = list(base.upper)
    for position in rng.sample(range(len(binaries)), k):
        j = binaries[position]
        value = float(rng.randint(0, 1))
        lower[j] = upper[j] = value

    delta = VariationDelta(VariationMask.of("LO", "UP"), lower=tuple(lower), upper=tuple(upper))
    return apply_variation(base, delta)


def perturb_objective(
    base: Instance,
    relative_noise: float,
    rotation_pairs: int,
    max_angle_radians: float,
    seed: int,
    index: int = 0
) -> Instance:
    """Multiplicative noise followed by random plane rotations of the objective.

    Each coefficient is scaled by a factor uniform in [1 - noise, 1 + noise].
    Then rotation_pairs Givens rotations are applied, each on a uniformly
    drawn pair (i, j), i != j, with angle uniform in [-max_angle, max_angle].
    """
    if relative_noise < 0:
        raise InvalidInputError(f"relative_noise must be non-negative, got {relative_noise}")
    if rotation_pairs < 0:
        raise InvalidInputError(f"rotation_pairs must be non-negative, got {rotation_pairs}")
    if not 0.0 <= max_angle_radians <= math.pi / 2:
        raise InvalidInputError(f"max_angle_radians must lie in [0, pi/2], got {max_angle_radians}")
    if not any(base.objective != 0.0):
        raise RecipeInapplicableError(Recipe.OBJ_PERTURB_ROTATE.value, "the objective vector is zero")

    rng = _stream(Recipe.OBJ_PERTURB_ROTATE, seed, index)
    c = [float(v) for v in base.objective]
    for j in range(len(c)):
        c[j] *= 1.0 + relative_noise * (2.0 * rng.uniform() - 1.0)

    n = len(c)
    if n >= 2:
        for _ in range(int(rotation_pairs)):
            i = rng.randint(0, n - 1)
            j = rng.randint(0, n - 2)
            if j >= i:
                j += 1
            theta = max_angle_radians * (2.0 * rng.uniform() - 1.0)
            cos_t, sin_t = math.cos(theta), math.sin(theta)
            c[i], c[j] = cos_t * c[i] - sin_t * c[j], sin_t * c[i] + cos_t * c[j]

    return apply_variation(base, VariationDelta(VariationMask.of("OBJ"), objective=tuple(c)))


def finite_rhs_rows(base: Instance) -> List[int]:
    """Indices of rows with a finite right-hand side."""
    return [i for i, row in enumerate(base.rows) if math.isfinite(row.rhs)]


def rhs_convex_combination(
    base: Instance,
    rhs_a: Sequence[float],
    rhs_b: Sequence[float],
    lam: float
) -> Instance:
    """Replace every finite rhs by lam * rhs_a + (1 - lam) * rhs_b.

    rhs_a and rhs_b are indexed over the rows with a finite rhs, in row order.
    """
    rows = finite_rhs_rows(base)
    if len(rhs_a) != len(rows) or len(rhs_b) != len(rows):
        raise StructuralError(
            f"rhs vectors have lengths {len(rhs_a)} and {len(rhs_b)}, "
            f"instance has {len(rows)} finite right-hand sides"
        )
    _check_fraction("lambda", lam)

    rhs = list(base.rhs)
    for position, i in enumerate(rows):
        value = lam * float(rhs_a[position]) + (1.0 - lam) * float(rhs_b[position])
        if base.rows[i].lhs > value:
            raise RecipeInapplicableError(
                Recipe.RHS_CONVEX.value,
                f"row '{base.rows[i].name}' would get rhs {value} below its lhs {base.rows[i].lhs}"
            )
        rhs[i] = value
    return apply_variation(base, VariationDelta(VariationMask.of("RHS"), rhs=tuple(rhs)))


def _scale(rng: SplitMix64, value: float, max_relative_change: float) -> float:
    return value * (1.0 + max_relative_change * (2.0 * rng.uniform() - 1.0))


def _perturb_row_sides(
    rng: SplitMix64,
    rows: Sequence[Row],
    max_relative_change: float,
    eligible
) -> Tuple[List[float], List[float], int]:
    """Perturb eligible sides row by row; equality rows move both sides together."""
    lhs = [row.lhs for row in rows]
    rhs = [row.rhs for row in rows]
    count = 0
    for i, row in enumerate(rows):
        if row.is_equality:
            if eligible(row.rhs):
                count += 1
                if rng.bernoulli(0.5):
                    lhs[i] = rhs[i] = _scale(rng, row.rhs, max_relative_change)
            continue
        for sides in (lhs, rhs):
            if eligible(sides[i]):
                count += 1
                if rng.bernoulli(0.5):
                    sides[i] = _scale(rng, sides[i], max_relative_change)
        if lhs[i] > rhs[i]:
            lhs[i], rhs[i] = rhs[i], lhs[i]
    return lhs, rhs, count


def perturb_sides(base: Instance, max_relative_change: float, seed: int, index: int = 0) -> Instance:
    """Scale finite non-negative row sides by a factor in [1 - p, 1 + p].

    Each eligible side is selected with probability 0.5. Sides that end up
    crossed are swapped; negative sides never change.
    """
    _check_fraction("max_relative_change", max_relative_change)
    rng = _stream(Recipe.SIDE_PERTURB, seed, index)
    lhs, rhs, count = _perturb_row_sides(
        rng, base.rows, max_relative_change, lambda v: math.isfinite(v) and v >= 0
    )
    if count == 0:
        raise RecipeInapplicableError(Recipe.SIDE_PERTURB.value, "no finite non-negative row side")
    delta = VariationDelta(VariationMask.of("LHS", "RHS"), lhs=tuple(lhs), rhs=tuple(rhs))
    return apply_variation(base, delta)


def perturb_sides_and_objective(
    base: Instance,
    max_relative_change: float,
    seed: int,
    index: int = 0
) -> Instance:
    """Scale nonzero objective coefficients and finite nonzero sides by up to +-p.

    Objective coefficients are drawn first (variable order), then sides
    (row order); each entry is selected with probability 0.5.
    """
    _check_fraction("max_relative_change", max_relative_change)
    rng = _stream(Recipe.SIDE_OBJ_PERTURB, seed, index)

    c = [float(v) for v in base.objective]
    count = 0
    for j, value in enumerate(c):
        if value != 0.0:
            count += 1
            if rng.bernoulli(0.5):
                c[j] = _scale(rng, value, max_relative_change)

    lhs, rhs, side_count = _perturb_row_sides(
        rng, base.rows, max_relative_change, lambda v: math.isfinite(v) and v != 0.0
    )
    if count + side_count == 0:
        raise RecipeInapplicableError(
            Recipe.SIDE_OBJ_PERTURB.value, "no nonzero objective coefficient or finite nonzero side"
        )
    delta = VariationDelta(
        VariationMask.of("OBJ", "LHS", "RHS"),
        objective=tuple(c),
        lhs=tuple(lhs),
        rhs=tuple(rhs),
    )
    return apply_variation(base, delta)
