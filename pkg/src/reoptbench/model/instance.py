"""In-memory MILP representation.

All types are frozen after construction. Infinite bounds and sides are
stored as ``math.inf``; sentinel magnitudes only exist in file formats.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from reoptbench.errors import StructuralError


class VarKind(str, Enum):
    """Variable domain kind."""
    CONTINUOUS = "continuous"
    BINARY = "binary"
    GENERAL_INTEGER = "general_integer"


class Sense(str, Enum):
    """Objective sense."""
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"


class Component(str, Enum):
    """Instance components that may vary across a series."""
    LO = "LO"
    UP = "UP"
    OBJ = "OBJ"
    LHS = "LHS"
    RHS = "RHS"
    MAT = "MAT"


COMPONENT_ORDER: Tuple[Component, ...] = tuple(Component)


def _check_real(value: float, what: str) -> None:
    if isinstance(value, float) and math.isnan(value):
        raise StructuralError(f"{what} is NaN")


@dataclass(frozen=True)
class Variable:
    """A decision variable."""
    name: str
    kind: VarKind = VarKind.CONTINUOUS
    lower: float = 0.0
    upper: float = math.inf
    objective_coefficient: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", VarKind(self.kind))
        for attr in ("lower", "upper", "objective_coefficient"):
            object.__setattr__(self, attr, float(getattr(self, attr)))
            _check_real(getattr(self, attr), f"variable '{self.name}' {attr}")
        if math.isinf(self.objective_coefficient):
            raise StructuralError(f"variable '{self.name}' has an infinite objective coefficient")
        if self.lower > self.upper:
            raise StructuralError(
                f"variable '{self.name}' has lower bound {self.lower} > upper bound {self.upper}"
            )
        if self.lower == math.inf or self.upper == -math.inf:
            raise StructuralError(f"variable '{self.name}' has an empty domain")
        if self.kind is VarKind.BINARY and (self.lower < 0 or self.upper > 1):
            raise StructuralError(
                f"binary variable '{self.name}' has bounds [{self.lower}, {self.upper}] outside [0, 1]"
            )

    @property
    def is_integer(self) -> bool:
        return self.kind is not VarKind.CONTINUOUS

    @property
    def has_binary_domain(self) -> bool:
        """Binary kind, or an integer column whose bounds are exactly [0, 1]."""
        if self.kind is VarKind.BINARY:
            return True
        return self.kind is VarKind.GENERAL_INTEGER and self.lower == 0.0 and self.upper == 1.0


@dataclass(frozen=True)
class Row:
    """A constraint lhs <= sum(a_j x_j) <= rhs with sparse coefficients."""
    name: str
    coefficients: Tuple[Tuple[int, float], ...] = ()
    lhs: float = -math.inf
    rhs: float = math.inf

    def __post_init__(self):
        coefficients = tuple(sorted((int(j), float(a)) for j, a in self.coefficients))
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "lhs", float(self.lhs))
        object.__setattr__(self, "rhs", float(self.rhs))
        _check_real(self.lhs, f"row '{self.name}' lhs")
        _check_real(self.rhs, f"row '{self.name}' rhs")
        if self.lhs > self.rhs:
            raise StructuralError(f"row '{self.name}' has lhs {self.lhs} > rhs {self.rhs}")
        if self.lhs == math.inf or self.rhs == -math.inf:
            raise StructuralError(f"row '{self.name}' has an unsatisfiable infinite side")
        previous = None
        for j, a in coefficients:
            if j == previous:
                raise StructuralError(f"row '{self.name}' references variable index {j} twice")
            if a == 0.0:
                raise StructuralError(f"row '{self.name}' stores an explicit zero for index {j}")
            if not math.isfinite(a):
                raise StructuralError(f"row '{self.name}' has a non-finite coefficient for index {j}")
            previous = j

    @property
    def is_equality(self) -> bool:
        return self.lhs == self.rhs


@dataclass(frozen=True)
class Instance:
    """A full MILP instance."""
    name: str
    variables: Tuple[Variable, ...] = ()
    rows: Tuple[Row, ...] = ()
    sense: Sense = Sense.MINIMIZE
    objective_constant: float = 0.0
    objective_name: str = "OBJ"

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "sense", Sense(self.sense))
        object.__setattr__(self, "objective_constant", float(self.objective_constant))
        if not math.isfinite(self.objective_constant):
            raise StructuralError("objective constant must be finite")

        seen = set()
        for var in self.variables:
            if var.name in seen:
                raise StructuralError(f"duplicate variable name '{var.name}'")
            seen.add(var.name)
        seen = set()
        n = len(self.variables)
        for row in self.rows:
            if row.name in seen:
                raise StructuralError(f"duplicate row name '{row.name}'")
            seen.add(row.name)
            for j, _ in row.coefficients:
                if not 0 <= j < n:
                    raise StructuralError(f"row '{row.name}' references invalid variable index {j}")

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def replace(self, **changes) -> "Instance":
        """Copy with some fields replaced (validated again)."""
        return replace(self, **changes)

    @cached_property
    def variable_index(self) -> Dict[str, int]:
        return {var.name: j for j, var in enumerate(self.variables)}

    @cached_property
    def lower(self) -> np.ndarray:
        return _frozen_array([v.lower for v in self.variables])

    @cached_property
    def upper(self) -> np.ndarray:
        return _frozen_array([v.upper for v in self.variables])

    @cached_property
    def objective(self) -> np.ndarray:
        return _frozen_array([v.objective_coefficient for v in self.variables])

    @cached_property
    def lhs(self) -> np.ndarray:
        return _frozen_array([r.lhs for r in self.rows])

    @cached_property
    def rhs(self) -> np.ndarray:
        return _frozen_array([r.rhs for r in self.rows])

    @cached_property
    def integer_mask(self) -> np.ndarray:
        mask = np.array([v.is_integer for v in self.variables], dtype=bool)
        mask.flags.writeable = False
        return mask

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        """Constraint matrix as CSR (rows x variables)."""
        indptr = [0]
        indices = []
        data = []
        for row in self.rows:
            for j, a in row.coefficients:
                indices.append(j)
                data.append(a)
            indptr.append(len(indices))
        return sp.csr_matrix(
            (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
            shape=(self.num_rows, self.num_variables),
        )


@dataclass(frozen=True)
class Solution:
    """Dense assignment, one value per variable in instance order."""
    values: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @classmethod
    def of(cls, values: Iterable[float]) -> "Solution":
        return cls(tuple(values))

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def _frozen_array(values: Sequence[float]) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    array.flags.writeable = False
    return array
