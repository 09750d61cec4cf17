"""Synthetic semicontinuous MILP family for RHS series.

    min  c^T x
    s.t. A x <= b
         l_j y_j <= x_j <= u_j y_j     (componentwise linking)
         x free continuous, y binary

Variables are x1..xn followed by y1..yn. Rows are a1..am followed by the
linking rows lo_j (l_j y_j - x_j <= 0) and up_j (x_j - u_j y_j <= 0) for
j = 1..n. The structure and the two candidate right-hand sides come from
separate streams, so different rhs pairs can share one matrix.
"""

import math
from typing import List, Sequence, Tuple

from reoptbench.errors import InvalidInputError
from reoptbench.model.instance import Instance, Row, Sense, VarKind, Variable
from reoptbench.simgen.rng import SplitMix64

STRUCTURE_TAG = "synthetic_semicontinuous"
RHS_TAG = "synthetic_semicontinuous/rhs"


def _check_range(name: str, bounds: Sequence[float]) -> Tuple[float, float]:
    low, high = (float(b) for b in bounds)
    if not (math.isfinite(low) and math.isfinite(high)) or low > high:
        raise InvalidInputError(f"{name} must be a finite range [low, high], got {list(bounds)}")
    return low, high


def gen_synthetic_semicontinuous(
    n: int,
    m: int,
    seed: int,
    rhs_stream: int = 0,
    matrix_range: Sequence[float] = (-10.0, 10.0),
    matrix_density: float = 0.2,
    objective_range: Sequence[float] = (1.0, 10.0),
    bound_range: Sequence[float] = (0.0, 10.0),
    rhs_range: Sequence[float] = (-10.0, 30.0),
) -> Tuple[Instance, List[float], List[float]]:
    """Generate the base instance and two rhs vectors for rhs_convex_combination.

    Args:
        n: Number of x (and y) variables
        m: Number of A rows
        seed: Generation seed
        rhs_stream: Stream index of the rhs pair; different values give
            different rhs vectors for the same matrix
        matrix_range: Range of nonzero A entries
        matrix_density: Probability of an A entry being nonzero
        objective_range: Range of c
        bound_range: Range the (l, u) pair is drawn from
        rhs_range: Range of both rhs vectors

    Returns:
        (instance, rhs_a, rhs_b); the vectors cover every row (all have a
        finite rhs), linking rows carry 0 in both. The instance uses rhs_a.
    """
    if n < 1 or m < 1:
        raise InvalidInputError(f"n and m must be at least 1, got n={n}, m={m}")
    if not 0.0 < matrix_density <= 1.0:
        raise InvalidInputError(f"matrix_density must lie in (0, 1], got {matrix_density}")
    a_low, a_high = _check_range("matrix_range", matrix_range)
    c_low, c_high = _check_range("objective_range", objective_range)
    b_low, b_high = _check_range("bound_range", bound_range)
    r_low, r_high = _check_range("rhs_range", rhs_range)
    if a_low == a_high == 0.0:
        raise InvalidInputError("matrix_range must allow nonzero entries")
    if b_low < 0:
        raise InvalidInputError("bound_range must be non-negative")

    rng = SplitMix64.stream(seed, STRUCTURE_TAG, 0)

    def entry() -> float:
        value = rng.uniform_range(a_low, a_high)
        while value == 0.0:
            value = rng.uniform_range(a_low, a_high)
        return value

    matrix_rows = []
    for _ in range(m):
        coefficients = [(j, entry()) for j in range(n) if rng.bernoulli(matrix_density)]
        if not coefficients:
            coefficients = [(rng.randint(0, n - 1), entry())]
        matrix_rows.append(coefficients)

    costs = [rng.uniform_range(c_low, c_high) for _ in range(n)]
    links = []
    for _ in range(n):
        first = rng.uniform_range(b_low, b_high)
        second = rng.uniform_range(b_low, b_high)
        links.append((min(first, second), max(first, second)))

    rhs_rng = SplitMix64.stream(seed, RHS_TAG, rhs_stream)
    rhs_a = [rhs_rng.uniform_range(r_low, r_high) for _ in range(m)]
    rhs_b = [rhs_rng.uniform_range(r_low, r_high) for _ in range(m)]

    variables = [
        Variable(f"x{j + 1}", VarKind.CONTINUOUS, -math.inf, math.inf, costs[j]) for j in range(n)
    ] + [
        Variable(f"y{j + 1}", VarKind.BINARY, 0.0, 1.0, 0.0) for j in range(n)
    ]

    rows = [
        Row(f"a{i + 1}", tuple(coefficients), -math.inf, rhs_a[i])
        for i, coefficients in enumerate(matrix_rows)
    ]
    for j, (low, high) in enumerate(links):
        x, y = j, n + j
        lo_row = [(x, -1.0)] + ([(y, low)] if low != 0.0 else [])
        up_row = [(x, 1.0)] + ([(y, -high)] if high != 0.0 else [])
        rows.append(Row(f"lo{j + 1}", tuple(lo_row), -math.inf, 0.0))
        rows.append(Row(f"up{j + 1}", tuple(up_row), -math.inf, 0.0))

    instance = Instance(
        name=f"semicontinuous_n{n}_m{m}",
        variables=tuple(variables),
        rows=tuple(rows),
        sense=Sense.MINIMIZE,
    )
    zeros = [0.0] * (2 * n)
    return instance, rhs_a + zeros, rhs_b + zeros
