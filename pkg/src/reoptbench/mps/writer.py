"""MPS writer.

Output parses back with reader.parse_mps (same dialect) to an instance equal
to the input, reals included: numbers are written in their shortest
round-trip form.
"""

import math
from pathlib import Path
from typing import Iterator, List, Optional, Tuple

import numpy as np

from reoptbench.errors import MpsWriteError, RunIOError
from reoptbench.model.instance import Instance, Row, Sense, VarKind, Variable
from reoptbench.mps.dialect import FIXED_FIELDS, FREE, MpsDialect
from reoptbench.utils.text import INFINITY_THRESHOLD, format_real, is_plain_name

_FREE_ROW_SIDE = "-1e+30"
_RANGE_SEARCH_STEPS = 4


class _Lines:
    """Collects output lines in the dialect's layout."""

    def __init__(self, dialect: MpsDialect):
        self.dialect = dialect
        self.lines: List[str] = []

    def header(self, text: str) -> None:
        self.lines.append(text)

    def data(self, *fields: Optional[str]) -> None:
        """Fields 1..6 of a data line; None leaves a field empty."""
        if not self.dialect.is_fixed:
            indent = "    " if fields[0] is None else " "
            self.lines.append(indent + "  ".join(f for f in fields if f is not None))
            return
        line = ""
        for (start, width), value in zip(FIXED_FIELDS, fields):
            if value is None:
                continue
            if len(value) > width:
                raise MpsWriteError(
                    f"'{value}' does not fit the {width}-character fixed MPS field; use the free dialect"
                )
            line = line.ljust(start - 1) + value
        self.lines.append(line)

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _real(value: float) -> str:
    if not math.isfinite(value) or abs(value) >= INFINITY_THRESHOLD:
        raise MpsWriteError(f"value {value!r} cannot be written as a finite MPS number")
    return format_real(value)


def _check_name(name: str, what: str, dialect: MpsDialect) -> None:
    if dialect.is_fixed:
        if not name or name != name.strip():
            raise MpsWriteError(f"{what} name {name!r} has leading or trailing blanks")
        return
    if not is_plain_name(name):
        raise MpsWriteError(f"{what} name {name!r} contains whitespace; not representable in free MPS")


def _ranged_row(row: Row) -> Tuple[str, float, float]:
    """(type, rhs value, range value) such that the reader restores [lhs, rhs] exactly."""
    lhs, rhs = row.lhs, row.rhs
    for code, side, target in (("G", lhs, rhs), ("L", rhs, lhs)):
        r = abs(rhs - lhs)
        candidates = [r]
        up = down = r
        for _ in range(_RANGE_SEARCH_STEPS):
            up = float(np.nextafter(up, math.inf))
            down = float(np.nextafter(down, 0.0))
            candidates.extend((up, down))
        for candidate in candidates:
            if not math.isfinite(candidate) or candidate <= 0:
                continue
            restored = side + candidate if code == "G" else side - candidate
            if restored == target:
                return code, side, candidate
    raise MpsWriteError(f"row '{row.name}' sides [{lhs!r}, {rhs!r}] cannot be encoded exactly with RANGES")


def _row_encoding(row: Row) -> Tuple[str, Optional[float], Optional[float]]:
    """(type code, RHS entry or None for 0, RANGES entry or None)."""
    lhs, rhs = row.lhs, row.rhs
    if lhs == rhs:
        return "E", rhs, None
    if math.isinf(lhs) and math.isinf(rhs):
        return "G", -math.inf, None
    if math.isinf(lhs):
        return "L", rhs, None
    if math.isinf(rhs):
        return "G", lhs, None
    return _ranged_row(row)


def _bound_lines(var: Variable) -> Iterator[Tuple[str, Optional[float]]]:
    lower, upper = var.lower, var.upper
    if var.kind is VarKind.BINARY:
        yield "BV", None
        if lower == upper:
            yield "FX", lower
            return
        if lower != 0.0:
            yield "LO", lower
        if upper != 1.0:
            yield "UP", upper
        return

    if lower == upper:
        yield "FX", lower
        return
    if lower == -math.inf and upper == math.inf:
        yield "FR", None
        return
    if lower == -math.inf:
        yield "MI", None
    elif lower != 0.0:
        yield "LO", lower
    if upper != math.inf:
        yield "UP", upper


def write_mps(instance: Instance, dialect: MpsDialect = FREE) -> str:
    """Serialize an instance as MPS text.

    Raises:
        MpsWriteError: a name or number does not fit the dialect, or a
            ranged row cannot be restored exactly
    """
    out = _Lines(dialect)
    objective = instance.objective_name
    row_names = {row.name for row in instance.rows}
    if objective in row_names:
        raise MpsWriteError(f"objective name '{objective}' collides with a constraint row")
    _check_name(objective, "objective", dialect)
    for var in instance.variables:
        _check_name(var.name, "variable", dialect)
    for row in instance.rows:
        _check_name(row.name, "row", dialect)

    if dialect.is_fixed:
        out.header(f"NAME          {instance.name}".rstrip())
    else:
        out.header(f"NAME {instance.name}".rstrip())
    if instance.sense is Sense.MAXIMIZE:
        out.header("OBJSENSE")
        out.data(None, "MAX")

    encodings = [_row_encoding(row) for row in instance.rows]
    out.header("ROWS")
    out.data("N", objective)
    for row, (code, _, _) in zip(instance.rows, encodings):
        out.data(code, row.name)

    out.header("COLUMNS")
    columns = instance.matrix.tocsc()
    in_integer_block = False
    marker = 0
    for j, var in enumerate(instance.variables):
        if var.is_integer != in_integer_block:
            out.data(None, f"M{marker:07d}", "'MARKER'", None, "'INTEND'" if in_integer_block else "'INTORG'")
            marker += 1
            in_integer_block = var.is_integer

        entries = []
        if var.objective_coefficient != 0.0:
            entries.append((objective, var.objective_coefficient))
        start, end = columns.indptr[j], columns.indptr[j + 1]
        for i, a in sorted(zip(columns.indices[start:end], columns.data[start:end])):
            entries.append((instance.rows[i].name, float(a)))
        if not entries:
            entries.append((objective, 0.0))
        for row_name, value in entries:
            out.data(None, var.name, row_name, _real(value))
    if in_integer_block:
        out.data(None, f"M{marker:07d}", "'MARKER'", None, "'INTEND'")

    out.header("RHS")
    if instance.objective_constant != 0.0:
        out.data(None, "RHS", objective, _real(-instance.objective_constant))
    for row, (_, side, _) in zip(instance.rows, encodings):
        if side == -math.inf:
            out.data(None, "RHS", row.name, _FREE_ROW_SIDE)
        elif side != 0.0:
            out.data(None, "RHS", row.name, _real(side))

    ranged = [(row, r) for row, (_, _, r) in zip(instance.rows, encodings) if r is not None]
    if ranged:
        out.header("RANGES")
        for row, r in ranged:
            out.data(None, "RNG", row.name, _real(r))

    bounds = [(var, code, value) for var in instance.variables for code, value in _bound_lines(var)]
    if bounds:
        out.header("BOUNDS")
        for var, code, value in bounds:
            out.data(code, "BND", var.name, None if value is None else _real(value))

    out.header("ENDATA")
    return out.text()


def write_mps_file(instance: Instance, path: Path, dialect: MpsDialect = FREE) -> Path:
    """Write an instance to an MPS file."""
    path = Path(path)
    text = write_mps(instance, dialect)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise RunIOError(path, f"cannot write MPS file: {e}")
    return path
