"""Shared fixtures: tiny instances, generated series and subprocess environment."""

import math
import os
import sys
from pathlib import Path

import pytest

from reoptbench.model.instance import Instance, Row, Sense, VarKind, Variable
from reoptbench.model.variation import VariationMask
from reoptbench.simgen.recipes import GeneratorSpec, Recipe
from reoptbench.simgen.series import generate_series, write_series

SRC_DIR = Path(__file__).resolve().parents[1] / "src"

KNAPSACK_MPS = """\
NAME knap
OBJSENSE
    MAX
ROWS
 N  value
 L  weight
COLUMNS
    MARKER    'MARKER'    'INTORG'
    a    value    6    weight    3
    b    value    5    weight    2
    c    value    4    weight    2
    d    value    3    weight    1
    MARKER    'MARKER'    'INTEND'
RHS
    RHS    weight    5
BOUNDS
 BV BND a
 BV BND b
 BV BND c
 BV BND d
ENDATA
"""


def make_knapsack() -> Instance:
    """max 6a + 5b + 4c + 3d s.t. 3a + 2b + 2c + d <= 5, binaries. Optimum 12 at (0, 1, 1, 1)."""
    values = (6.0, 5.0, 4.0, 3.0)
    weights = (3.0, 2.0, 2.0, 1.0)
    return Instance(
        name="knap",
        variables=tuple(
            Variable(name, VarKind.BINARY, 0.0, 1.0, v)
            for name, v in zip("abcd", values)
        ),
        rows=(Row("weight", tuple(enumerate(weights)), -math.inf, 5.0),),
        sense=Sense.MAXIMIZE,
        objective_name="value",
    )


@pytest.fixture
def knapsack() -> Instance:
    return make_knapsack()


@pytest.fixture
def small_lp() -> Instance:
    """Two continuous columns, one row x + 2y <= 10, min x - y."""
    return Instance(
        name="small",
        variables=(
            Variable("x", VarKind.CONTINUOUS, 0.0, math.inf, 1.0),
            Variable("y", VarKind.CONTINUOUS, 0.0, math.inf, -1.0),
        ),
        rows=(Row("c1", ((0, 1.0), (1, 2.0)), -math.inf, 10.0),),
    )


@pytest.fixture
def synthetic_spec() -> GeneratorSpec:
    return GeneratorSpec(
        recipe=Recipe.SYNTHETIC_SEMICONTINUOUS,
        parameters={"n": 2, "m": 2},
        seed=7,
        candidate_count=3,
        series_length=3,
    )


@pytest.fixture
def series_dir(tmp_path, synthetic_spec) -> Path:
    """A written three-instance synthetic series; returns its manifest path."""
    manifest, instances = generate_series(
        synthetic_spec,
        series_name="toy",
        mask=VariationMask.of("RHS"),
        default_time_limit=30.0,
    )
    return write_series(tmp_path / "series", manifest, instances)


@pytest.fixture
def subprocess_env(monkeypatch):
    """Make the package importable by solver subprocesses started from tests."""
    existing = os.environ.get("PYTHONPATH")
    path = str(SRC_DIR) if not existing else str(SRC_DIR) + os.pathsep + existing
    monkeypatch.setenv("PYTHONPATH", path)
    return sys.executable
