"""Batch means and CSV reports."""

import csv
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

from reoptbench.errors import IncompleteSeriesError, InvalidInputError, RunIOError
from reoptbench.schemas import ScoreRecord
from reoptbench.score.ranking import RankTable

SCORE_COLUMNS = ["series", "instance", "team", "reltime", "gap", "nofeas", "f", "rank"]
SUMMARY_COLUMNS = ["team", "series", "batch", "reltime", "gap", "nofeas", "f"]
FINAL_COLUMNS = ["team", "C", "position"]


@dataclass
class BatchMeans:
    """Arithmetic means over one batch of instances."""
    label: str
    count: int
    reltime: float
    gap: float
    nofeas: float
    f: float


@dataclass
class BatchReport:
    """Means over the whole series and over consecutive batches."""
    series: str
    overall: BatchMeans
    batches: List[BatchMeans] = field(default_factory=list)


def _means(label: str, records: Sequence[ScoreRecord]) -> BatchMeans:
    # statistics.mean sums exactly and rounds once
    return BatchMeans(
        label=label,
        count=len(records),
        reltime=statistics.mean(r.reltime for r in records),
        gap=statistics.mean(r.gap for r in records),
        nofeas=statistics.mean(float(r.nofeas) for r in records),
        f=statistics.mean(r.f for r in records),
    )


def batch_report(
    records: Iterable[ScoreRecord],
    series_length: int = 50,
    batch_size: int = 10
) -> BatchReport:
    """Means of reltime, gap, nofeas and f over all instances and per batch.

    Batches are 1-10, 11-20, ... (the last one may be shorter).

    Raises:
        IncompleteSeriesError: some of instances 1..series_length are missing
        InvalidInputError: duplicate instances, several series, or instances
            beyond series_length
    """
    by_index: Dict[int, ScoreRecord] = {}
    series_names = set()
    for record in records:
        if record.instance in by_index:
            raise InvalidInputError(f"instance {record.instance} appears twice")
        by_index[record.instance] = record
        series_names.add(record.series)
    if len(series_names) > 1:
        raise InvalidInputError(f"records span several series: {sorted(series_names)}")

    extra = sorted(i for i in by_index if i > series_length)
    if extra:
        raise InvalidInputError(f"instances {extra} lie beyond the series length {series_length}")
    missing = [i for i in range(1, series_length + 1) if i not in by_index]
    if missing:
        raise IncompleteSeriesError(missing)

    ordered = [by_index[i] for i in range(1, series_length + 1)]
    batches = []
    for start in range(0, series_length, batch_size):
        chunk = ordered[start:start + batch_size]
        batches.append(_means(f"{start + 1}-{start + len(chunk)}", chunk))
    return BatchReport(
        series=series_names.pop() if series_names else "",
        overall=_means("all", ordered),
        batches=batches,
    )


def _open_csv(path: Path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as e:
        raise RunIOError(path, f"cannot write report: {e}")


def write_score_csv(path: Path, records: Mapping[str, Sequence[ScoreRecord]], table: RankTable) -> Path:
    """Per-instance scores and ranks, one row per (series, instance, team)."""
    rows: List[Tuple] = []
    for team, team_records in records.items():
        for r in team_records:
            rank = table.ranks.get((r.series, r.instance), {}).get(team, "")
            rows.append((r.series, r.instance, team, r.reltime, r.gap, r.nofeas, r.f, rank))
    rows.sort(key=lambda row: (row[0], row[1], row[2]))
    with _open_csv(path) as f:
        writer = csv.writer(f)
        writer.writerow(SCORE_COLUMNS)
        writer.writerows(rows)
    return Path(path)


def write_summary_csv(path: Path, reports: Mapping[str, Sequence[BatchReport]]) -> Path:
    """Batch means per team and series; batch 'all' is the overall mean."""
    with _open_csv(path) as f:
        writer = csv.writer(f)
        writer.writerow(SUMMARY_COLUMNS)
        for team in sorted(reports):
            for report in reports[team]:
                for means in [report.overall] + report.batches:
                    writer.writerow([team, report.series, means.label,
                                     means.reltime, means.gap, means.nofeas, means.f])
    return Path(path)


def write_final_csv(path: Path, final: Mapping[str, float]) -> Path:
    """Final weighted score C per team, best (lowest) first."""
    ordered = sorted(final.items(), key=lambda item: (item[1], item[0]))
    with _open_csv(path) as f:
        writer = csv.writer(f)
        writer.writerow(FINAL_COLUMNS)
        for position, (team, c) in enumerate(ordered, start=1):
            writer.writerow([team, c, position])
    return Path(path)
