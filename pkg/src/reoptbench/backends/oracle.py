"""Exhaustive enumeration oracle for desk-scale instances.

Integer variables range over every integer in their (finite) bounds.
A continuous variable is accepted only when two-entry rows link it to a
single binary-domain variable y such that its feasible interval is finite
for y = 0 and for y = 1; it then takes one of the two interval end points.
The optimum is therefore exact for pure integer instances and exact over
that vertex grid for semicontinuous ones.

Assignments are enumerated in lexicographic order, the first variable being
the most significant digit, and an incumbent is only replaced by a strictly
better one, so the reported optimum is the lexicographically smallest.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from reoptbench.backends.base import Backend, BackendResult, infeasible_bound, no_bound
from reoptbench.config import OracleConfig
from reoptbench.errors import CapabilityError, StructuralError
from reoptbench.model.feasibility import (
    DEFAULT_TOLERANCES,
    FeasTolerances,
    batch_feasible,
    batch_objective,
)
from reoptbench.model.instance import Instance, Sense, Solution
from reoptbench.schemas import RunStatus, SolveOutcome
from reoptbench.utils.time import monotonic_seconds

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinkedContinuous:
    """A continuous variable whose values follow a binary variable."""
    binary: int
    when_zero: Tuple[float, float]
    when_one: Tuple[float, float]


@dataclass(frozen=True)
class EnumerationDomain:
    """Mixed-radix description of an enumerable instance."""
    radices: Tuple[int, ...]
    offsets: Tuple[float, ...]
    linked: Dict[int, LinkedContinuous]

    @property
    def size(self) -> int:
        return math.prod(self.radices)

    def decode(self, indices: np.ndarray) -> np.ndarray:
        """Assignments for flat enumeration indices, shape (len(indices), n)."""
        n = len(self.radices)
        X = np.zeros((len(indices), n))
        if n == 0:
            return X
        digits = np.unravel_index(indices, self.radices)
        for j in range(n):
            if j not in self.linked:
                X[:, j] = self.offsets[j] + digits[j]
        for j, link in self.linked.items():
            on = X[:, link.binary] > 0.5
            low = np.where(on, link.when_one[0], link.when_zero[0])
            high = np.where(on, link.when_one[1], link.when_zero[1])
            X[:, j] = np.where(digits[j] == 0, low, high)
        return X


def _link_interval(instance: Instance, j: int, columns) -> LinkedContinuous:
    var = instance.variables[j]
    start, end = columns.indptr[j], columns.indptr[j + 1]
    binary: Optional[int] = None
    intervals = {0: [var.lower, var.upper], 1: [var.lower, var.upper]}

    for i, a_x in zip(columns.indices[start:end], columns.data[start:end]):
        row = instance.rows[i]
        if len(row.coefficients) != 2:
            continue
        (k, a_k), = [(k, a) for k, a in row.coefficients if k != j]
        if not instance.variables[k].has_binary_domain:
            continue
        if binary is not None and binary != k:
            raise CapabilityError(f"continuous variable '{var.name}' is linked to several binaries")
        binary = k
        for y in (0, 1):
            low = (row.lhs - a_k * y) / a_x
            high = (row.rhs - a_k * y) / a_x
            if a_x < 0:
                low, high = high, low
            intervals[y][0] = max(intervals[y][0], low)
            intervals[y][1] = min(intervals[y][1], high)

    if binary is None:
        raise CapabilityError(f"continuous variable '{var.name}' is not linked to a binary variable")
    for y in (0, 1):
        if not all(math.isfinite(v) for v in intervals[y]):
            raise CapabilityError(
                f"continuous variable '{var.name}' has an unbounded range when its binary is {y}"
            )
    return LinkedContinuous(binary, tuple(intervals[0]), tuple(intervals[1]))


def check_enumerable(instance: Instance, domain_cap: int = 2 ** 24) -> EnumerationDomain:
    """Build the enumeration domain or explain why the instance is not enumerable.

    Raises:
        CapabilityError: unbounded integer variable, unlinked continuous
            variable, or a domain product above domain_cap
    """
    columns = instance.matrix.tocsc()
    radices: List[int] = []
    offsets: List[float] = []
    linked: Dict[int, LinkedContinuous] = {}
    size = 1

    for j, var in enumerate(instance.variables):
        if var.is_integer:
            if not (math.isfinite(var.lower) and math.isfinite(var.upper)):
                raise CapabilityError(f"integer variable '{var.name}' has an infinite bound")
            low, high = math.ceil(var.lower), math.floor(var.upper)
            radix = max(0, high - low + 1)
            offsets.append(float(low))
        else:
            linked[j] = _link_interval(instance, j, columns)
            radix = 2
            offsets.append(0.0)
        radices.append(radix)
        size *= radix
        if size > domain_cap:
            raise CapabilityError(
                f"domain of '{instance.name}' exceeds the enumeration cap of {domain_cap} assignments"
            )
    return EnumerationDomain(tuple(radices), tuple(offsets), linked)


def _outcome(
    sense: Sense,
    elapsed: float,
    time_limit: float,
    completed: bool,
    best_value: Optional[float],
    bound_if_empty: float
) -> Tuple[SolveOutcome, RunStatus]:
    if completed and best_value is not None:
        status = RunStatus.OPTIMAL
        outcome = SolveOutcome(
            time_spent_seconds=elapsed,
            time_limit_seconds=time_limit,
            solved_to_optimality=True,
            primal_bound=best_value,
            dual_bound=best_value,
            has_feasible_solution=True,
        )
    elif completed:
        status = RunStatus.TIMEOUT_NOFEAS
        outcome = SolveOutcome(
            time_spent_seconds=elapsed,
            time_limit_seconds=time_limit,
            dual_bound=bound_if_empty,
            stopped_early_without_zero_gap=True,
        )
    elif best_value is not None:
        status = RunStatus.TIMEOUT_INCUMBENT
        outcome = SolveOutcome(
            time_spent_seconds=elapsed,
            time_limit_seconds=time_limit,
            primal_bound=best_value,
            dual_bound=no_bound(sense),
            has_feasible_solution=True,
        )
    else:
        status = RunStatus.TIMEOUT_NOFEAS
        outcome = SolveOutcome(
            time_spent_seconds=elapsed,
            time_limit_seconds=time_limit,
            dual_bound=no_bound(sense),
        )
    return outcome, status


def enumerate_solve(
    instance: Instance,
    time_limit: float,
    warm_start: Optional[Solution] = None,
    cutoff: Optional[float] = None,
    config: Optional[OracleConfig] = None,
    tolerances: FeasTolerances = DEFAULT_TOLERANCES,
) -> BackendResult:
    """Solve by exhaustive enumeration.

    Args:
        instance: Instance passing check_enumerable
        time_limit: Seconds; 0 returns at once with the warm start (if any)
        warm_start: Initial incumbent, kept unless something strictly better
            is found
        cutoff: Only assignments strictly better than this are accepted
        config: Domain cap and batch size
        tolerances: Feasibility tolerances

    Returns:
        BackendResult with status optimal, timeout_incumbent or timeout_nofeas

    Raises:
        CapabilityError: instance is not enumerable
    """
    config = config or OracleConfig()
    start = monotonic_seconds()
    domain = check_enumerable(instance, config.domain_cap)
    sign = 1.0 if instance.sense is Sense.MINIMIZE else -1.0
    limit = max(float(time_limit), 1e-9)

    best_key = math.inf
    best_x: Optional[np.ndarray] = None
    if cutoff is not None:
        best_key = sign * cutoff
    if warm_start is not None:
        if len(warm_start) != instance.num_variables:
            raise StructuralError(
                f"warm start has {len(warm_start)} values, instance has {instance.num_variables} variables"
            )
        x = warm_start.as_array().reshape(1, -1)
        if batch_feasible(instance, x, tolerances)[0]:
            key = sign * float(batch_objective(instance, x)[0])
            if key <= best_key:
                best_key, best_x = key, x[0]
        else:
            logger.warning("warm start for %s is infeasible and was ignored", instance.name)

    total = domain.size
    completed = True
    position = 0
    while position < total:
        if monotonic_seconds() - start >= time_limit:
            completed = False
            break
        indices = np.arange(position, min(position + config.batch_size, total))
        X = domain.decode(indices)
        keys = sign * batch_objective(instance, X)
        keys = np.where(batch_feasible(instance, X, tolerances), keys, math.inf)
        m = int(np.argmin(keys))
        if keys[m] < best_key:
            best_key, best_x = float(keys[m]), X[m].copy()
        position += len(indices)

    elapsed = monotonic_seconds() - start
    best_value = None
    solution = None
    if best_x is not None:
        solution = Solution.of(best_x.tolist())
        best_value = float(batch_objective(instance, best_x.reshape(1, -1))[0])
    bound_if_empty = cutoff if cutoff is not None else infeasible_bound(instance.sense)
    outcome, status = _outcome(instance.sense, elapsed, limit, completed, best_value, bound_if_empty)
    return BackendResult(outcome=outcome, solution=solution, status=status)


class EnumerationBackend(Backend):
    """Built-in backend: the enumeration oracle."""

    name = "oracle"

    def __init__(self, config: Optional[OracleConfig] = None, tolerances: FeasTolerances = DEFAULT_TOLERANCES):
        self.config = config or OracleConfig()
        self.tolerances = tolerances

    def solve(
        self,
        instance: Instance,
        time_limit: float,
        warm_start: Optional[Solution] = None,
        cutoff: Optional[float] = None,
        instance_path: Optional[Path] = None,
    ) -> BackendResult:
        return enumerate_solve(instance, time_limit, warm_start, cutoff, self.config, self.tolerances)
