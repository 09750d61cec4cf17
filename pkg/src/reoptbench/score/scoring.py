"""Per-instance scoring: f = reltime + gap + nofeas.

Tiers when the time limit is respected: solved instances score in [0, 1],
timeouts with an incumbent in (1, 2], timeouts without one exactly 3.
"""

import math
from typing import Optional

from reoptbench.config import ScoringConfig
from reoptbench.model.instance import Sense
from reoptbench.schemas import ScoreRecord, SolveOutcome


def reltime(outcome: SolveOutcome) -> float:
    """time_spent / time_limit, clamped below at 1 unless solved.

    The clamp also gives exactly 1 to a solver that stops before the limit
    without closing the gap.
    """
    ratio = outcome.time_spent_seconds / outcome.time_limit_seconds
    return ratio if outcome.solved_to_optimality else max(1.0, ratio)


def gap(pb: Optional[float], db: Optional[float]) -> float:
    """Relative primal-dual gap in [0, 1].

    0 if both bounds are 0; 1 if either is absent or infinite or the signs
    differ; |pb - db| / max(|pb|, |db|) otherwise.
    """
    if pb is None or db is None or math.isinf(pb) or math.isinf(db):
        return 1.0
    if pb == 0.0 and db == 0.0:
        return 0.0
    if pb * db < 0:
        return 1.0
    return abs(pb - db) / max(abs(pb), abs(db))


def audit_outcome(outcome: SolveOutcome, config: Optional[ScoringConfig] = None) -> SolveOutcome:
    """Downgrade a claimed optimum whose bounds do not close the gap."""
    config = config or ScoringConfig()
    if not outcome.solved_to_optimality:
        return outcome
    if gap(outcome.primal_bound, outcome.dual_bound) <= config.optimality_gap_tolerance:
        return outcome
    return outcome.model_copy(update={"solved_to_optimality": False})


def dual_bound_valid(
    outcome: SolveOutcome,
    sense: Sense = Sense.MINIMIZE,
    config: Optional[ScoringConfig] = None
) -> bool:
    """False if the dual bound crosses the primal bound beyond tolerance."""
    config = config or ScoringConfig()
    pb, db = outcome.primal_bound, outcome.dual_bound
    if pb is None or db is None or math.isinf(pb):
        return True
    tolerance = config.dual_bound_tolerance * max(1.0, abs(pb))
    if sense is Sense.MINIMIZE:
        return db - pb <= tolerance
    return pb - db <= tolerance


def instance_score(
    outcome: SolveOutcome,
    series: str = "",
    instance: int = 1,
    valid: bool = True,
    config: Optional[ScoringConfig] = None
) -> ScoreRecord:
    """Score one outcome after auditing its optimality claim.

    Args:
        outcome: Outcome reported for the instance
        series: Series name stored in the record
        instance: 1-based position in the series
        valid: Validity verdict from the harness audit (used for ranking)
        config: Scoring tolerances

    Returns:
        ScoreRecord with f = reltime + gap + nofeas
    """
    audited = audit_outcome(outcome, config)
    rel = reltime(audited)
    g = 0.0 if audited.solved_to_optimality else gap(audited.primal_bound, audited.dual_bound)
    nofeas = 0 if audited.has_feasible_solution else 1
    return ScoreRecord(
        series=series,
        instance=instance,
        reltime=rel,
        gap=g,
        nofeas=nofeas,
        f=rel + g + nofeas,
        valid=valid,
    )
