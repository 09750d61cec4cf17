"""Solution evaluation and feasibility checking.

Row and bound violations are reported scaled by ``1 + |side|`` so that a
report is feasible exactly when every category's maximum violation is at
most its tolerance. The enumeration oracle evaluates whole batches with the
same helpers, so there is one definition of feasibility.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from reoptbench.config import FeasibilityConfig
from reoptbench.errors import InvalidInputError, StructuralError
from reoptbench.model.instance import Instance, Solution


@dataclass(frozen=True)
class FeasTolerances:
    """Tolerances for check_feasibility."""
    row: float = 1e-6
    bound: float = 1e-6
    integrality: float = 1e-5

    def __post_init__(self):
        for name in ("row", "bound", "integrality"):
            value = getattr(self, name)
            if not value >= 0.0:
                raise InvalidInputError(f"{name} tolerance must be non-negative, got {value}")

    @classmethod
    def from_config(cls, config: FeasibilityConfig) -> "FeasTolerances":
        return cls(
            row=config.row_tolerance,
            bound=config.bound_tolerance,
            integrality=config.integrality_tolerance,
        )


DEFAULT_TOLERANCES = FeasTolerances()


@dataclass(frozen=True)
class FeasReport:
    """Per-category maximum (scaled) violations of a solution."""
    feasible: bool
    max_bound_violation: float
    max_row_violation: float
    max_integrality_violation: float
    worst_offender: Optional[str] = None


def _ratio(violation: float, tolerance: float) -> float:
    if tolerance == 0.0:
        return math.inf if violation > 0.0 else 0.0
    return violation / tolerance


def _check_length(instance: Instance, n: int) -> None:
    if n != instance.num_variables:
        raise StructuralError(
            f"solution has {n} values but instance '{instance.name}' has "
            f"{instance.num_variables} variables"
        )


def objective_value(instance: Instance, solution: Solution) -> float:
    """objective_constant + sum of objective_coefficient * value."""
    _check_length(instance, len(solution))
    if instance.num_variables == 0:
        return instance.objective_constant
    return instance.objective_constant + float(np.dot(instance.objective, solution.as_array()))


def batch_objective(instance: Instance, X: np.ndarray) -> np.ndarray:
    """Objective values of a batch of assignments (one per row of X)."""
    return instance.objective_constant + X @ instance.objective


def _side_violation(excess: np.ndarray, side: np.ndarray) -> np.ndarray:
    # excess is +inf-free because sides with infinite value never produce excess
    scale = 1.0 + np.abs(np.where(np.isfinite(side), side, 0.0))
    return np.maximum(excess, 0.0) / scale


def batch_row_violation(instance: Instance, X: np.ndarray) -> np.ndarray:
    """Scaled row violations, shape (batch, rows)."""
    if instance.num_rows == 0:
        return np.zeros((X.shape[0], 0))
    activity = np.asarray((instance.matrix @ X.T).T).reshape(X.shape[0], instance.num_rows)
    lhs, rhs = instance.lhs, instance.rhs
    with np.errstate(invalid="ignore"):
        below = np.where(np.isfinite(lhs), lhs - activity, 0.0)
        above = np.where(np.isfinite(rhs), activity - rhs, 0.0)
    return np.maximum(_side_violation(below, lhs), _side_violation(above, rhs))


def batch_bound_violation(instance: Instance, X: np.ndarray) -> np.ndarray:
    """Scaled bound violations, shape (batch, variables)."""
    lower, upper = instance.lower, instance.upper
    below = np.where(np.isfinite(lower), lower - X, 0.0)
    above = np.where(np.isfinite(upper), X - upper, 0.0)
    return np.maximum(_side_violation(below, lower), _side_violation(above, upper))


def batch_integrality_violation(instance: Instance, X: np.ndarray) -> np.ndarray:
    """Distance to the nearest integer for integer columns, shape (batch, variables)."""
    distance = np.abs(X - np.round(X))
    return np.where(instance.integer_mask, distance, 0.0)


def batch_feasible(
    instance: Instance,
    X: np.ndarray,
    tolerances: FeasTolerances = DEFAULT_TOLERANCES
) -> np.ndarray:
    """Feasibility flags of a batch of assignments."""
    ok = np.ones(X.shape[0], dtype=bool)
    if instance.num_variables:
        ok &= batch_bound_violation(instance, X).max(axis=1) <= tolerances.bound
        ok &= batch_integrality_violation(instance, X).max(axis=1) <= tolerances.integrality
    if instance.num_rows:
        ok &= batch_row_violation(instance, X).max(axis=1) <= tolerances.row
    return ok


def check_feasibility(
    instance: Instance,
    solution: Solution,
    tolerances: FeasTolerances = DEFAULT_TOLERANCES
) -> FeasReport:
    """Check a solution against bounds, rows and integrality.

    Args:
        instance: Instance to check against
        solution: Dense solution in instance variable order
        tolerances: Row, bound and integrality tolerances

    Returns:
        FeasReport with per-category maximum violations

    Raises:
        StructuralError: solution length differs from the variable count
        InvalidInputError: solution contains NaN or infinite values
    """
    _check_length(instance, len(solution))
    x = solution.as_array()
    if not np.all(np.isfinite(x)):
        bad = int(np.flatnonzero(~np.isfinite(x))[0])
        raise InvalidInputError(
            f"solution value for '{instance.variables[bad].name}' is not a finite number"
        )
    X = x.reshape(1, -1)

    candidates = []  # (violation / tolerance, name)
    bound_violation = row_violation = integrality_violation = 0.0

    if instance.num_variables:
        bounds = batch_bound_violation(instance, X)[0]
        integrality = batch_integrality_violation(instance, X)[0]
        j = int(np.argmax(bounds))
        bound_violation = float(bounds[j])
        candidates.append((_ratio(bound_violation, tolerances.bound), instance.variables[j].name))
        j = int(np.argmax(integrality))
        integrality_violation = float(integrality[j])
        candidates.append((_ratio(integrality_violation, tolerances.integrality), instance.variables[j].name))

    if instance.num_rows:
        rows = batch_row_violation(instance, X)[0]
        i = int(np.argmax(rows))
        row_violation = float(rows[i])
        candidates.append((_ratio(row_violation, tolerances.row), instance.rows[i].name))

    feasible = (
        bound_violation <= tolerances.bound
        and row_violation <= tolerances.row
        and integrality_violation <= tolerances.integrality
    )

    worst_offender = None
    if candidates:
        ratio, name = max(candidates, key=lambda c: c[0])
        if ratio > 0:
            worst_offender = name

    return FeasReport(
        feasible=feasible,
        max_bound_violation=bound_violation,
        max_row_violation=row_violation,
        max_integrality_violation=integrality_violation,
        worst_offender=worst_offender,
    )
