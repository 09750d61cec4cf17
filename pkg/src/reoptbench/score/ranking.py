"""Per-instance ranking across teams and the weighted final score.

Valid teams are ranked by ascending f with standard competition ranking
("1224"): rank = 1 + number of valid teams with a strictly smaller f. Invalid
results get twice the worst possible rank, 2 * T for T teams.

Final score: C = sum over series s and instances i of (1 + i/10) * r(s, i).
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata

from reoptbench.errors import IncompleteTableError, InvalidInputError
from reoptbench.schemas import ScoreRecord

Key = Tuple[str, int]


def rank_instance(scores: Mapping[str, float], validity: Mapping[str, bool]) -> Dict[str, int]:
    """Rank the teams on one instance (lower f is better).

    Args:
        scores: team -> f
        validity: team -> whether the result passed the audit; teams
            missing here count as valid

    Returns:
        team -> rank
    """
    if not scores:
        raise InvalidInputError("ranking needs at least one team")
    teams = sorted(scores)
    penalty = 2 * len(teams)
    valid = [t for t in teams if validity.get(t, True)]
    ranks = {t: penalty for t in teams if t not in valid}
    if valid:
        ordinal = rankdata(np.array([scores[t] for t in valid], dtype=float), method="min")
        ranks.update({t: int(r) for t, r in zip(valid, ordinal)})
    return ranks


def instance_weight(i: int) -> float:
    """Weight of instance i in the final score: 1 + 0.1 i."""
    return (10 + i) / 10


@dataclass
class RankTable:
    """Ranks per (series, instance) and team."""
    teams: List[str]
    ranks: Dict[Key, Dict[str, int]] = field(default_factory=dict)
    validity: Dict[Key, Dict[str, bool]] = field(default_factory=dict)

    def rank(self, series: str, instance: int, team: str) -> int:
        return self.ranks[(series, instance)][team]

    def series_names(self) -> List[str]:
        return sorted({s for s, _ in self.ranks})


def build_rank_table(records: Mapping[str, Iterable[ScoreRecord]]) -> RankTable:
    """Rank every (series, instance) that appears in the teams' score records."""
    scores: Dict[Key, Dict[str, float]] = {}
    validity: Dict[Key, Dict[str, bool]] = {}
    for team, team_records in records.items():
        for record in team_records:
            key = (record.series, record.instance)
            if team in scores.setdefault(key, {}):
                raise InvalidInputError(f"team '{team}' has two scores for {key}")
            scores[key][team] = record.f
            validity.setdefault(key, {})[team] = record.valid

    table = RankTable(teams=sorted(records))
    for key in sorted(scores):
        table.ranks[key] = rank_instance(scores[key], validity[key])
        table.validity[key] = validity[key]
    return table


def missing_entries(
    table: RankTable,
    series_length: int = 50,
    series: Optional[Sequence[str]] = None
) -> List[Tuple[str, int, str]]:
    """(series, instance, team) triples without a rank."""
    missing = []
    for s in series or table.series_names():
        for i in range(1, series_length + 1):
            entry = table.ranks.get((s, i), {})
            missing.extend((s, i, team) for team in table.teams if team not in entry)
    return missing


def final_score(
    table: RankTable,
    series_length: int = 50,
    series: Optional[Sequence[str]] = None
) -> Dict[str, float]:
    """Weighted rank sum C per team; lower is better.

    Computed on integers (sum of (10 + i) * r) and divided by 10 once, so
    e.g. 50 first places give exactly 177.5.

    Raises:
        IncompleteTableError: an (s, i, team) entry is missing
    """
    missing = missing_entries(table, series_length, series)
    if missing:
        raise IncompleteTableError(missing)
    totals = {team: 0 for team in table.teams}
    for s in series or table.series_names():
        for i in range(1, series_length + 1):
            for team, r in table.ranks[(s, i)].items():
                totals[team] += (10 + i) * r
    return {team: total / 10 for team, total in totals.items()}
