"""Masked variations of an instance and structural diffs between instances."""

from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from reoptbench.errors import ContractViolation, StructuralError
from reoptbench.model.instance import COMPONENT_ORDER, Component, Instance, Row, Variable


@dataclass(frozen=True)
class VariationMask:
    """Set of components allowed to differ across a series."""
    flags: FrozenSet[Component] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "flags", frozenset(Component(f) for f in self.flags))

    @classmethod
    def of(cls, *flags) -> "VariationMask":
        return cls(frozenset(Component(str(f).upper()) for f in flags))

    def __contains__(self, component) -> bool:
        return Component(component) in self.flags

    def __bool__(self) -> bool:
        return bool(self.flags)

    def to_list(self) -> List[str]:
        """Flags in canonical LO, UP, OBJ, LHS, RHS, MAT order."""
        return [c.value for c in COMPONENT_ORDER if c in self.flags]


@dataclass(frozen=True)
class VariationDelta:
    """Replacement vectors for masked components; None leaves a component untouched.

    ``matrix`` replaces the coefficient list of every row (MAT).
    """
    mask: VariationMask
    lower: Optional[Tuple[float, ...]] = None
    upper: Optional[Tuple[float, ...]] = None
    objective: Optional[Tuple[float, ...]] = None
    lhs: Optional[Tuple[float, ...]] = None
    rhs: Optional[Tuple[float, ...]] = None
    matrix: Optional[Tuple[Tuple[Tuple[int, float], ...], ...]] = None

    def touched(self) -> FrozenSet[Component]:
        touched = set()
        for component, value in (
            (Component.LO, self.lower),
            (Component.UP, self.upper),
            (Component.OBJ, self.objective),
            (Component.LHS, self.lhs),
            (Component.RHS, self.rhs),
            (Component.MAT, self.matrix),
        ):
            if value is not None:
                touched.add(component)
        return frozenset(touched)


def _as_tuple(values: Optional[Sequence[float]], expected: int, what: str) -> Optional[Tuple[float, ...]]:
    if values is None:
        return None
    values = tuple(float(v) for v in values)
    if len(values) != expected:
        raise StructuralError(f"{what} delta has {len(values)} entries, expected {expected}")
    return values


def apply_variation(base: Instance, delta: VariationDelta) -> Instance:
    """Return a copy of base with the masked components replaced.

    Variable and row counts, order and names are preserved; every component
    outside the delta keeps its exact values.
    """
    outside = delta.touched() - delta.mask.flags
    if outside:
        names = ", ".join(c.value for c in COMPONENT_ORDER if c in outside)
        raise ContractViolation(f"variation touches components outside its mask: {names}")

    n, m = base.num_variables, base.num_rows
    lower = _as_tuple(delta.lower, n, "LO")
    upper = _as_tuple(delta.upper, n, "UP")
    objective = _as_tuple(delta.objective, n, "OBJ")
    lhs = _as_tuple(delta.lhs, m, "LHS")
    rhs = _as_tuple(delta.rhs, m, "RHS")
    if delta.matrix is not None and len(delta.matrix) != m:
        raise StructuralError(f"MAT delta has {len(delta.matrix)} rows, expected {m}")

    variables = base.variables
    if lower is not None or upper is not None or objective is not None:
        variables = tuple(
            Variable(
                name=var.name,
                kind=var.kind,
                lower=var.lower if lower is None else lower[j],
                upper=var.upper if upper is None else upper[j],
                objective_coefficient=var.objective_coefficient if objective is None else objective[j],
            )
            for j, var in enumerate(base.variables)
        )

    rows = base.rows
    if lhs is not None or rhs is not None or delta.matrix is not None:
        rows = tuple(
            Row(
                name=row.name,
                coefficients=row.coefficients if delta.matrix is None else delta.matrix[i],
                lhs=row.lhs if lhs is None else lhs[i],
                rhs=row.rhs if rhs is None else rhs[i],
            )
            for i, row in enumerate(base.rows)
        )

    return base.replace(variables=variables, rows=rows)


@dataclass
class InstanceDiff:
    """Result of diff_instances."""
    structural: List[str] = field(default_factory=list)
    changed: FrozenSet[Component] = frozenset()

    @property
    def same_structure(self) -> bool:
        return not self.structural

    def outside(self, mask: VariationMask) -> FrozenSet[Component]:
        """Changed components not permitted by the mask."""
        return self.changed - mask.flags


def _differs(a: Iterable[float], b: Iterable[float]) -> bool:
    # bit-level comparison; == alone would equate 0.0 and -0.0
    return np.asarray(list(a), dtype=float).tobytes() != np.asarray(list(b), dtype=float).tobytes()


def diff_instances(a: Instance, b: Instance) -> InstanceDiff:
    """Compare two instances field by field.

    Structural mismatches (counts, names, order, kinds, sense) are listed;
    data differences are reported as the set of changed components.
    """
    diff = InstanceDiff()
    if a.num_variables != b.num_variables:
        diff.structural.append(f"variable count {a.num_variables} != {b.num_variables}")
    if a.num_rows != b.num_rows:
        diff.structural.append(f"row count {a.num_rows} != {b.num_rows}")
    if diff.structural:
        return diff

    for j, (u, v) in enumerate(zip(a.variables, b.variables)):
        if u.name != v.name:
            diff.structural.append(f"variable {j} name '{u.name}' != '{v.name}'")
        if u.kind != v.kind:
            diff.structural.append(f"variable '{u.name}' kind {u.kind.value} != {v.kind.value}")
    for i, (r, s) in enumerate(zip(a.rows, b.rows)):
        if r.name != s.name:
            diff.structural.append(f"row {i} name '{r.name}' != '{s.name}'")
    if a.sense != b.sense:
        diff.structural.append(f"sense {a.sense.value} != {b.sense.value}")
    if a.objective_constant != b.objective_constant:
        diff.structural.append("objective constant differs")

    changed = set()
    if _differs(a.lower, b.lower):
        changed.add(Component.LO)
    if _differs(a.upper, b.upper):
        changed.add(Component.UP)
    if _differs(a.objective, b.objective):
        changed.add(Component.OBJ)
    if _differs(a.lhs, b.lhs):
        changed.add(Component.LHS)
    if _differs(a.rhs, b.rhs):
        changed.add(Component.RHS)
    if any(r.coefficients != s.coefficients for r, s in zip(a.rows, b.rows)):
        changed.add(Component.MAT)
    diff.changed = frozenset(changed)
    return diff


def varying_vector(instance: Instance, mask: VariationMask) -> np.ndarray:
    """Concatenate the masked vector components in canonical order.

    Infinite entries are replaced by 0 so that the vector is usable for
    similarity; the positions stay aligned across instances of a series.
    """
    parts = []
    for component in COMPONENT_ORDER:
        if component not in mask.flags:
            continue
        if component is Component.LO:
            parts.append(instance.lower)
        elif component is Component.UP:
            parts.append(instance.upper)
        elif component is Component.OBJ:
            parts.append(instance.objective)
        elif component is Component.LHS:
            parts.append(instance.lhs)
        elif component is Component.RHS:
            parts.append(instance.rhs)
        elif component is Component.MAT:
            parts.append(instance.matrix.toarray().ravel())
    if not parts:
        return np.zeros(0)
    vector = np.concatenate(parts)
    return np.where(np.isfinite(vector), vector, 0.0)
