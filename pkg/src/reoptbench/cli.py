"""Command-line interface for reoptbench.

Subcommands:
    generate  build a series (instance files + manifest.json)
    run       run a solver over a series under the harness
    check     verify the structural contract of a generated series
    score     score run records and rank teams
    report    print per-instance results and batch means of a run record
    solve     solve one instance with the enumeration oracle

Exit codes: 0 success, 1 usage error, 2 domain error, 3 I/O error.
Configuration precedence: defaults < --config YAML < environment < flags.
"""

import argparse
import logging
import os
import shlex
import sys
import tempfile
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import yaml
from pydantic import ValidationError

from reoptbench.config import Config
from reoptbench.errors import (
    EXIT_DOMAIN,
    EXIT_OK,
    EXIT_USAGE,
    InvalidInputError,
    ReoptBenchError,
)
from reoptbench.harness.record import load_run
from reoptbench.harness.runner import limits_from_manifest, run_series
from reoptbench.model.solution import read_solution, write_solution
from reoptbench.model.variation import VariationMask
from reoptbench.mps.dialect import MpsDialect
from reoptbench.mps.reader import read_mps_file
from reoptbench.observability.tracer import Tracer
from reoptbench.reopt import get_backend
from reoptbench.schemas import RunLimits, ScoreRecord, SeriesManifest, SeriesRunRecord
from reoptbench.score.ranking import build_rank_table, final_score
from reoptbench.score.report import (
    BatchReport,
    batch_report,
    write_final_csv,
    write_score_csv,
    write_summary_csv,
)
from reoptbench.score.scoring import instance_score
from reoptbench.simgen.recipes import GeneratorSpec, Recipe
from reoptbench.simgen.series import check_series, generate_series, write_series
from reoptbench.simgen.similarity import similarity_profile
from reoptbench.utils.text import format_optional_real
from reoptbench.utils.time import format_duration, timer

logger = logging.getLogger(__name__)

SYNTHETIC_RANGE_KEYS = ("matrix_range", "matrix_density", "objective_range", "bound_range", "rhs_range")


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"❌ Error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


class UsageError(Exception):
    """Invalid combination of flags."""


def _band(text: Optional[str]) -> Optional[Tuple[float, float]]:
    if text is None:
        return None
    try:
        low, high = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"band must be 'low,high', got {text!r}")
    if low > high:
        raise UsageError(f"band {text!r} is empty")
    return low, high


def _params(items: Sequence[str]) -> Dict[str, object]:
    parameters = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--param expects key=value, got {item!r}")
        parameters[key] = yaml.safe_load(value)
    return parameters


def _save_trace(tracer: Tracer, config: Config, enabled: bool) -> None:
    if enabled and tracer.entries:
        path = tracer.save_to_artifacts(config.artifacts_dir)
        print(f"📝 Trace saved to: {path}")


# --- generate ---------------------------------------------------------------

def generate(args: argparse.Namespace, config: Config, tracer: Tracer) -> Path:
    """Generate a series into args.out; returns the manifest path."""
    preset = config.get_recipe_preset(args.preset) if args.preset else {}
    recipe_name = args.recipe or preset.get("recipe")
    if not recipe_name:
        raise UsageError("either --recipe or --preset is required")
    try:
        recipe = Recipe(recipe_name)
    except ValueError:
        raise UsageError(f"unknown recipe '{recipe_name}' (choose from {[r.value for r in Recipe]})")

    parameters = dict(preset.get("parameters") or {})
    parameters.update(_params(args.param))
    if recipe is Recipe.SYNTHETIC_SEMICONTINUOUS:
        for key in SYNTHETIC_RANGE_KEYS:
            value = getattr(config.generation, key)
            parameters.setdefault(key, list(value) if isinstance(value, tuple) else value)

    series_length = args.series_length or config.generation.series_length
    try:
        spec = GeneratorSpec(
            recipe=recipe,
            parameters=parameters,
            seed=args.seed,
            series_length=series_length,
            candidate_count=args.candidates or max(config.generation.candidate_count, series_length),
        )
    except ValidationError as e:
        raise InvalidInputError(f"invalid generator parameters: {e}")

    dialect = MpsDialect.from_name(args.dialect)
    base = read_mps_file(Path(args.base), dialect) if args.base else None
    mask_flags = args.mask.split(",") if args.mask else preset.get("mask")
    mask = VariationMask.of(*mask_flags) if mask_flags else None
    series_name = args.series_name or args.preset or recipe.value
    time_limit = args.time_limit or preset.get("time_limit_seconds") or 600.0

    manifest, instances = generate_series(
        spec,
        base,
        series_name=series_name,
        base_instance=args.base or "synthetic",
        mask=mask,
        time_band=_band(args.time_band),
        similarity_band=_band(args.similarity_band),
        default_time_limit=float(time_limit),
        measure_times=args.measure_times,
        config=config,
        tracer=tracer,
    )
    with tracer.stage("write", str(args.out)) as op:
        manifest_path = write_series(Path(args.out), manifest, instances, dialect)
        op.set_output(f"{len(instances)} files")

    profile = [s for s in similarity_profile(instances, VariationMask.of(*manifest.variation_mask)) if s is not None]
    print(f"✅ Series '{manifest.series_name}': {len(instances)} instances, "
          f"time limit {manifest.time_limit_seconds:g}s")
    if profile:
        print(f"   Similarity to first instance: min {min(profile):.4f}, max {max(profile):.4f}")
    print(f"📝 Manifest: {manifest_path}")
    return manifest_path


# --- run --------------------------------------------------------------------

def run(args: argparse.Namespace, config: Config, tracer: Tracer) -> SeriesRunRecord:
    """Run a solver over a series and stream the record to args.out."""
    solver_command = shlex.split(args.solver)
    if not solver_command:
        raise UsageError("--solver must name a command")
    manifest = SeriesManifest.load(Path(args.manifest))
    limits = limits_from_manifest(manifest, config)
    updates = {}
    if args.time_limit:
        updates["per_instance_time_limit_seconds"] = args.time_limit
        updates["total_budget_seconds"] = config.harness.budget_multiplier * args.time_limit
    if args.budget:
        updates["total_budget_seconds"] = args.budget
    if updates:
        try:
            limits = RunLimits.model_validate({**limits.model_dump(), **updates})
        except ValidationError as e:
            raise InvalidInputError(f"invalid limits: {e}")

    print(f"🚀 Running {args.solver} on '{manifest.series_name}' "
          f"({len(manifest.instance_files)} instances, {limits.per_instance_time_limit_seconds:g}s each)")
    with timer() as t:
        record = run_series(
            solver_command,
            Path(args.manifest),
            limits,
            config,
            tracer,
            record_path=Path(args.out),
            stderr_path=Path(args.stderr) if args.stderr else None,
            dialect=MpsDialect.from_name(args.dialect),
        )
    statuses: Dict[str, int] = {}
    for result in record.results:
        statuses[result.status.value] = statuses.get(result.status.value, 0) + 1
    print(f"📊 {len(record.results)} outcomes in {format_duration(t.elapsed_seconds)}: "
          + ", ".join(f"{k}={v}" for k, v in sorted(statuses.items())))
    invalid = [r.index for r in record.results if not r.valid]
    if invalid:
        print(f"   Failed audit: instances {invalid}")
    if record.protocol_violations:
        print(f"❌ {len(record.protocol_violations)} protocol violations:")
        for violation in record.protocol_violations[:20]:
            print(f"   - {violation}")
    else:
        print("✅ No protocol violations")
    print(f"📝 Record: {args.out}")
    return record


# --- check ------------------------------------------------------------------

def check(args: argparse.Namespace, config: Config) -> bool:
    report = check_series(
        Path(args.manifest),
        MpsDialect.from_name(args.dialect),
        expected_length=args.expected_length or config.generation.series_length,
    )
    for note in report.notes:
        print(f"⚠️  {note}")
    if report.ok:
        print(f"✅ {report.instance_count} instances share one structure and vary only inside the mask")
    else:
        print(f"❌ {len(report.problems)} problems:")
        for problem in report.problems:
            print(f"   - {problem}")
    return report.ok


# --- score ------------------------------------------------------------------

def _team_records(items: Sequence[str]) -> List[Tuple[str, Path]]:
    pairs = []
    for item in items:
        team, sep, path = item.partition("=")
        if not sep:
            team, path = Path(item).stem, item
        pairs.append((team, Path(path)))
    return pairs


def _series_length(record: SeriesRunRecord, override: Optional[int]) -> int:
    if override:
        return override
    try:
        return len(SeriesManifest.load(Path(record.manifest_path)).instance_files)
    except ReoptBenchError:
        return len(record.results)


def score_records(
    team_records: Sequence[Tuple[str, SeriesRunRecord]],
    config: Config,
    series_length: Optional[int] = None
) -> Tuple[Dict[str, List[ScoreRecord]], Dict[str, List[BatchReport]], Dict[str, float]]:
    """Score every record, build batch means and the final weighted score.

    Returns:
        (scores per team, batch reports per team, final C per team)
    """
    scores: Dict[str, List[ScoreRecord]] = {}
    reports: Dict[str, List[BatchReport]] = {}
    lengths: Dict[str, int] = {}
    for team, record in team_records:
        length = _series_length(record, series_length)
        if lengths.setdefault(record.series_name, length) != length:
            raise InvalidInputError(f"series '{record.series_name}' has records of different lengths")
        records = [
            instance_score(r.outcome, record.series_name, r.index, r.valid, config.scoring)
            for r in record.results
        ]
        scores.setdefault(team, []).extend(records)
        reports.setdefault(team, []).append(batch_report(records, length))

    table = build_rank_table(scores)
    lengths_seen = set(lengths.values())
    final: Dict[str, float] = {team: 0.0 for team in table.teams}
    for length in sorted(lengths_seen):
        names = [s for s, n in lengths.items() if n == length]
        for team, c in final_score(table, length, names).items():
            final[team] += c
    return scores, reports, final


def score(args: argparse.Namespace, config: Config, tracer: Tracer) -> Dict[str, float]:
    team_records = []
    with tracer.stage("load", f"{len(args.record)} records") as op:
        for team, path in _team_records(args.record):
            team_records.append((team, load_run(path)))
        op.set_output(", ".join(f"{t}:{r.series_name}" for t, r in team_records))

    with tracer.stage("score", f"{len(team_records)} records") as op:
        scores, reports, final = score_records(team_records, config, args.series_length)
        op.set_output(f"{len(final)} teams")

    out = Path(args.out)
    table = build_rank_table(scores)
    write_score_csv(out / "scores.csv", scores, table)
    write_summary_csv(out / "summary.csv", reports)
    write_final_csv(out / "final.csv", final)

    print("=" * 60)
    print("📊 FINAL SCORE (lower is better)")
    print("=" * 60)
    for position, (team, c) in enumerate(sorted(final.items(), key=lambda item: (item[1], item[0])), start=1):
        means = ", ".join(f"{r.series}: f={r.overall.f:.4f}" for r in reports[team])
        print(f"{position}. {team}: C = {c:g} ({means})")
    print()
    print(f"📝 Reports saved to: {out}")
    return final


# --- report -----------------------------------------------------------------

def report(args: argparse.Namespace, config: Config) -> None:
    record = load_run(Path(args.record))
    length = _series_length(record, args.series_length)
    records = [
        instance_score(r.outcome, record.series_name, r.index, r.valid, config.scoring)
        for r in record.results
    ]
    print(f"Series: {record.series_name}  Solver: {' '.join(record.solver_command)}")
    print(f"{'#':>3}  {'status':<18} {'time':>9} {'pb':>14} {'db':>14} {'f':>8}  audit")
    for result, s in zip(record.results, records):
        outcome = result.outcome
        audit = "ok" if result.valid else "; ".join(result.audit_notes)
        if result.synthesized:
            audit = "synthesized"
        print(f"{result.index:>3}  {result.status.value:<18} {outcome.time_spent_seconds:>8.2f}s "
              f"{format_optional_real(outcome.primal_bound):>14} {format_optional_real(outcome.dual_bound):>14} "
              f"{s.f:>8.4f}  {audit}")
    summary = batch_report(records, length)
    print()
    print(f"{'batch':<8} {'reltime':>8} {'gap':>8} {'nofeas':>8} {'f':>8}")
    for means in summary.batches + [summary.overall]:
        print(f"{means.label:<8} {means.reltime:>8.4f} {means.gap:>8.4f} {means.nofeas:>8.4f} {means.f:>8.4f}")
    if record.protocol_violations:
        print()
        print(f"❌ {len(record.protocol_violations)} protocol violations")
        for violation in record.protocol_violations:
            print(f"   - {violation}")


# --- solve ------------------------------------------------------------------

def solve(args: argparse.Namespace, config: Config) -> None:
    """Solve one instance; prints a RESULT line usable by the exec backend."""
    dialect = MpsDialect.from_name(args.dialect)
    instance = read_mps_file(Path(args.instance), dialect)
    warm = read_solution(Path(args.warm_start), instance) if args.warm_start else None
    backend = get_backend("oracle", config)
    result = backend.solve(instance, args.time_limit, warm, args.cutoff, Path(args.instance))

    solution_path = "-"
    if result.solution is not None:
        if args.solution_out:
            target = Path(args.solution_out)
        else:
            handle, name = tempfile.mkstemp(prefix=f"{instance.name}_", suffix=".sol")
            os.close(handle)
            target = Path(name)
        solution_path = str(write_solution(target, instance, result.solution).resolve())

    outcome = result.outcome
    print(f"{'✅' if outcome.solved_to_optimality else '⏱️ '} {instance.name}: {result.status.value} "
          f"in {format_duration(outcome.time_spent_seconds)}", file=sys.stderr)
    print(
        f"RESULT {result.status.value} {format_optional_real(outcome.primal_bound)} "
        f"{format_optional_real(outcome.dual_bound)} {solution_path}"
    )


# --- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="reoptbench",
        description="Benchmark toolkit for MILP reoptimization over instance series"
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="YAML configuration file")
    common.add_argument("--artifacts-dir", type=str, default=None, help="Where traces are written")
    common.add_argument("--no-artifacts", action="store_true", help="Do not save a trace")
    common.add_argument("--dialect", choices=["free", "fixed"], default="free", help="MPS dialect")
    common.add_argument("--verbose", action="store_true", help="Verbose logging")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="Generate an instance series")
    p.add_argument("--preset", type=str, help="Series preset name (recipes/<name>.yaml)")
    p.add_argument("--recipe", type=str, help="Recipe name (overrides the preset)")
    p.add_argument("--param", action="append", default=[], help="Recipe parameter key=value (repeatable)")
    p.add_argument("--base", type=str, help="Base MPS instance (not needed for synthetic recipes)")
    p.add_argument("--seed", type=int, required=True, help="Generation seed")
    p.add_argument("--out", type=str, required=True, help="Output directory of the series")
    p.add_argument("--series-name", type=str, help="Series name (default: preset or recipe)")
    p.add_argument("--series-length", type=int, help="Instances per series")
    p.add_argument("--candidates", type=int, help="Candidates generated before selection")
    p.add_argument("--mask", type=str, help="Variation mask, e.g. LHS,RHS")
    p.add_argument("--time-limit", type=float, help="Per-instance time limit when not measured")
    p.add_argument("--time-band", type=str, help="Accepted solve times 'low,high' (needs --measure-times)")
    p.add_argument("--similarity-band", type=str, help="Accepted similarity to the base 'low,high'")
    p.add_argument("--measure-times", action="store_true", help="Measure solve times with the oracle")

    p = sub.add_parser("run", parents=[common], help="Run a solver over a series")
    p.add_argument("--solver", type=str, required=True, help="Solver command (receives --manifest)")
    p.add_argument("--manifest", type=str, required=True, help="Series manifest")
    p.add_argument("--out", type=str, required=True, help="Run record (JSONL) to write")
    p.add_argument("--time-limit", type=float, help="Per-instance time limit override")
    p.add_argument("--budget", type=float, help="Total budget in seconds")
    p.add_argument("--stderr", type=str, help="File receiving the solver's stderr")

    p = sub.add_parser("check", parents=[common], help="Check a generated series")
    p.add_argument("--manifest", type=str, required=True, help="Series manifest")
    p.add_argument("--expected-length", type=int, help="Expected number of instances")

    p = sub.add_parser("score", parents=[common], help="Score run records")
    p.add_argument("--record", action="append", required=True,
                   help="Run record, optionally TEAM=PATH (repeatable)")
    p.add_argument("--out", type=str, required=True, help="Directory for the CSV reports")
    p.add_argument("--series-length", type=int, help="Instances per series (default: from the manifest)")

    p = sub.add_parser("report", parents=[common], help="Show one run record")
    p.add_argument("--record", type=str, required=True, help="Run record")
    p.add_argument("--series-length", type=int, help="Instances per series (default: from the manifest)")

    p = sub.add_parser("solve", parents=[common], help="Solve one instance with the oracle")
    p.add_argument("--instance", type=str, required=True, help="MPS instance")
    p.add_argument("--time-limit", type=float, required=True, help="Time limit in seconds")
    p.add_argument("--warm-start", type=str, help="Solution file to start from")
    p.add_argument("--cutoff", type=float, help="Only accept solutions strictly better than this")
    p.add_argument("--solution-out", type=str, help="Where to write the solution")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI entry point; returns the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        config = Config.load(Path(args.config) if args.config else None)
    except (OSError, ValueError, yaml.YAMLError) as e:
        print(f"❌ Error: cannot load configuration: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.artifacts_dir:
        config.artifacts_dir = args.artifacts_dir

    tracer = Tracer(args.command)
    try:
        if args.command == "generate":
            generate(args, config, tracer)
        elif args.command == "run":
            record = run(args, config, tracer)
            _save_trace(tracer, config, not args.no_artifacts)
            return EXIT_OK if not record.protocol_violations else EXIT_DOMAIN
        elif args.command == "check":
            return EXIT_OK if check(args, config) else EXIT_DOMAIN
        elif args.command == "score":
            score(args, config, tracer)
        elif args.command == "report":
            report(args, config)
        elif args.command == "solve":
            solve(args, config)
    except UsageError as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ReoptBenchError as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        _save_trace(tracer, config, not args.no_artifacts)
        return e.exit_code

    _save_trace(tracer, config, not args.no_artifacts)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
