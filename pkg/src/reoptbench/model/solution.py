"""Solution files: one ``<variable name> <value>`` pair per line.

Variables not listed default to 0. Blank lines and lines starting with ``#``
are skipped.
"""

import math
from pathlib import Path
from typing import Dict

from reoptbench.errors import InvalidInputError, RunIOError
from reoptbench.model.instance import Instance, Solution
from reoptbench.utils.text import format_real


def parse_solution(text: str, instance: Instance) -> Solution:
    """Parse solution text against the variables of an instance."""
    index = instance.variable_index
    values = [0.0] * instance.num_variables
    seen: Dict[str, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InvalidInputError(f"solution line {lineno}: expected '<name> <value>', got {raw!r}")
        name, token = parts
        if name not in index:
            raise InvalidInputError(f"solution line {lineno}: unknown variable '{name}'")
        if name in seen:
            raise InvalidInputError(
                f"solution line {lineno}: variable '{name}' already set on line {seen[name]}"
            )
        try:
            value = float(token)
        except ValueError:
            raise InvalidInputError(f"solution line {lineno}: invalid value {token!r}")
        if not math.isfinite(value):
            raise InvalidInputError(f"solution line {lineno}: value for '{name}' is not finite")
        seen[name] = lineno
        values[index[name]] = value

    return Solution(tuple(values))


def read_solution(path: Path, instance: Instance) -> Solution:
    """Read a solution file for the given instance."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise RunIOError(path, f"cannot read solution file: {e}")
    return parse_solution(text, instance)


def format_solution(instance: Instance, solution: Solution) -> str:
    """Render every variable, including zeros, in instance order."""
    if len(solution) != instance.num_variables:
        raise InvalidInputError(
            f"solution has {len(solution)} values, instance has {instance.num_variables} variables"
        )
    lines = [
        f"{var.name} {format_real(value)}"
        for var, value in zip(instance.variables, solution.values)
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def write_solution(path: Path, instance: Instance, solution: Solution) -> Path:
    """Write a solution file; the file is replaced atomically."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_text(format_solution(instance, solution), encoding="utf-8")
        tmp.replace(path)
    except OSError as e:
        raise RunIOError(path, f"cannot write solution file: {e}")
    return path
