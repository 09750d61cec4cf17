"""Series assembly: candidate generation, selection, manifests and checks."""

import logging
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from reoptbench.config import Config, GenerationConfig
from reoptbench.errors import CapabilityError, InsufficientCandidatesError, InvalidInputError, RunIOError
from reoptbench.model.instance import Instance
from reoptbench.model.variation import VariationMask, diff_instances
from reoptbench.mps.dialect import FREE, MpsDialect
from reoptbench.mps.reader import read_mps_file
from reoptbench.mps.writer import write_mps_file
from reoptbench.observability.tracer import Tracer
from reoptbench.schemas import SeriesManifest
from reoptbench.simgen.recipes import (
    GeneratorSpec,
    Recipe,
    finite_rhs_rows,
    fix_binaries,
    perturb_bounds,
    perturb_objective,
    perturb_sides,
    perturb_sides_and_objective,
    rhs_convex_combination,
)
from reoptbench.simgen.rng import SplitMix64
from reoptbench.simgen.similarity import masked_similarity
from reoptbench.simgen.synthetic import gen_synthetic_semicontinuous

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
Band = Optional[Tuple[float, float]]


@dataclass(frozen=True)
class CandidateRecord:
    """A generated instance with its selection metrics (None when unknown)."""
    instance: Instance
    solve_time_seconds: Optional[float] = None
    similarity_to_base: Optional[float] = None


def _in_band(value: float, band: Tuple[float, float]) -> bool:
    return band[0] <= value <= band[1]


def series_time_limit(
    solve_times: Sequence[Optional[float]],
    default: float,
    config: Optional[GenerationConfig] = None
) -> float:
    """multiplier x median known solve time, rounded up to the granularity.

    Falls back to default when no solve time is known.
    """
    config = config or GenerationConfig()
    known = [t for t in solve_times if t is not None]
    if not known:
        return float(default)
    step = config.time_limit_granularity
    raw = config.time_limit_multiplier * statistics.median(known)
    return float(max(step, math.ceil(raw / step) * step))


def instance_file_name(position: int, count: int) -> str:
    """01.mps, 02.mps, ... (wider when the series has 100 or more instances)."""
    width = max(2, len(str(count)))
    return f"{position:0{width}d}.mps"


def assemble_series(
    candidates: Sequence[CandidateRecord],
    target: int = 50,
    time_band: Band = None,
    similarity_band: Band = None,
    *,
    mask: VariationMask,
    series_name: str = "series",
    seed: int = 0,
    base_instance: str = "synthetic",
    recipe: str = "",
    parameters: Optional[Dict[str, Any]] = None,
    default_time_limit: float = 600.0,
    config: Optional[GenerationConfig] = None,
) -> Tuple[SeriesManifest, List[Instance]]:
    """Select the first `target` candidates whose metrics fall in the bands.

    A band of None does not filter. A candidate with unknown solve time fails
    a time band; a candidate whose similarity is not applicable passes the
    similarity band.

    Raises:
        InsufficientCandidatesError: fewer than target candidates qualify
    """
    if not mask:
        raise InvalidInputError("a series needs a non-empty variation mask")
    config = config or GenerationConfig()
    selected: List[CandidateRecord] = []
    rejected = {"time": 0, "similarity": 0}
    for candidate in candidates:
        if len(selected) == target:
            break
        if time_band is not None and (
            candidate.solve_time_seconds is None or not _in_band(candidate.solve_time_seconds, time_band)
        ):
            rejected["time"] += 1
            continue
        if (
            similarity_band is not None
            and candidate.similarity_to_base is not None
            and not _in_band(candidate.similarity_to_base, similarity_band)
        ):
            rejected["similarity"] += 1
            continue
        selected.append(candidate)

    if len(selected) < target:
        if rejected["time"] == rejected["similarity"] == 0:
            band = "none (too few candidates)"
        else:
            band = "time" if rejected["time"] >= rejected["similarity"] else "similarity"
        raise InsufficientCandidatesError(band, len(selected), target, rejected)

    instances = [
        c.instance.replace(name=f"{series_name}_{position:02d}")
        for position, c in enumerate(selected, start=1)
    ]
    manifest = SeriesManifest(
        series_name=series_name,
        instance_files=[instance_file_name(k, target) for k in range(1, target + 1)],
        variation_mask=mask.to_list(),
        time_limit_seconds=series_time_limit(
            [c.solve_time_seconds for c in selected], default_time_limit, config
        ),
        seed=seed,
        base_instance=base_instance,
        recipe=recipe,
        parameters=dict(parameters or {}),
    )
    return manifest, instances


def _lambda_grid(count: int) -> List[float]:
    if count == 1:
        return [1.0]
    return [k / (count - 1) for k in range(count)]


def spread_rhs(base: Instance, spread: float, seed: int) -> List[float]:
    """Second rhs vector for a file base: each finite rhs moved by up to spread * max(1, |v|)."""
    rng = SplitMix64.stream(seed, Recipe.RHS_CONVEX.value, 0)
    values = []
    for i in finite_rhs_rows(base):
        v = base.rows[i].rhs
        values.append(v + spread * max(1.0, abs(v)) * (2.0 * rng.uniform() - 1.0))
    return values


def generate_candidates(spec: GeneratorSpec, base: Optional[Instance]) -> Tuple[Instance, List[Instance]]:
    """Generate spec.candidate_count candidates.

    Returns:
        (reference instance, candidates); the reference is the base for file
        recipes and the generated structure for the synthetic recipe.
    """
    p = spec.parameters
    count = spec.candidate_count
    seed = spec.seed

    if spec.recipe is Recipe.SYNTHETIC_SEMICONTINUOUS:
        reference, rhs_a, rhs_b = gen_synthetic_semicontinuous(
            n=int(p["n"]),
            m=int(p["m"]),
            seed=seed,
            rhs_stream=int(p["rhs_stream"]),
            matrix_range=p["matrix_range"],
            matrix_density=float(p["matrix_density"]),
            objective_range=p["objective_range"],
            bound_range=p["bound_range"],
            rhs_range=p["rhs_range"],
        )
        return reference, [rhs_convex_combination(reference, rhs_a, rhs_b, lam) for lam in _lambda_grid(count)]

    if base is None:
        raise InvalidInputError(f"recipe '{spec.recipe.value}' needs a base instance")

    if spec.recipe is Recipe.RHS_CONVEX:
        rhs_a = [base.rows[i].rhs for i in finite_rhs_rows(base)]
        rhs_b = spread_rhs(base, float(p["rhs_spread"]), seed)
        return base, [rhs_convex_combination(base, rhs_a, rhs_b, lam) for lam in _lambda_grid(count)]

    if spec.recipe is Recipe.BOUND_PERTURB:
        make = lambda k: perturb_bounds(base, float(p["max_relative_change"]), seed, k)
    elif spec.recipe is Recipe.BINARY_FIX:
        make = lambda k: fix_binaries(base, float(p["fraction_low"]), float(p["fraction_high"]), seed, k)
    elif spec.recipe is Recipe.OBJ_PERTURB_ROTATE:
        make = lambda k: perturb_objective(
            base, float(p["relative_noise"]), int(p["rotation_pairs"]), float(p["max_angle_radians"]), seed, k
        )
    elif spec.recipe is Recipe.SIDE_PERTURB:
        make = lambda k: perturb_sides(base, float(p["max_relative_change"]), seed, k)
    else:
        make = lambda k: perturb_sides_and_objective(base, float(p["max_relative_change"]), seed, k)
    return base, [make(k) for k in range(count)]


def measure_solve_time(instance: Instance, time_limit: float, config: Config) -> Optional[float]:
    """Cold-solve time with the enumeration oracle; None if unsolved or not enumerable."""
    from reoptbench.backends.oracle import enumerate_solve

    try:
        result = enumerate_solve(instance, time_limit, config=config.oracle)
    except CapabilityError as e:
        logger.warning("solve time not measured for %s: %s", instance.name, e)
        return None
    if not result.outcome.solved_to_optimality:
        return None
    return result.outcome.time_spent_seconds


def generate_series(
    spec: GeneratorSpec,
    base: Optional[Instance] = None,
    *,
    series_name: str,
    base_instance: str = "synthetic",
    mask: Optional[VariationMask] = None,
    time_band: Band = None,
    similarity_band: Band = None,
    default_time_limit: float = 600.0,
    measure_times: bool = False,
    config: Optional[Config] = None,
    tracer: Optional[Tracer] = None,
) -> Tuple[SeriesManifest, List[Instance]]:
    """Generate candidates, compute their metrics and assemble the series.

    The manifest mask is the recipe's mask unless a wider one is given.
    """
    config = config or Config()
    tracer = tracer or Tracer("generate")
    recipe_mask = spec.mask
    if mask is None:
        mask = recipe_mask
    elif not recipe_mask.flags <= mask.flags:
        raise InvalidInputError(
            f"mask {mask.to_list()} does not cover the components of recipe '{spec.recipe.value}' "
            f"({recipe_mask.to_list()})"
        )

    with tracer.stage("candidates", f"recipe={spec.recipe.value} seed={spec.seed}") as op:
        reference, instances = generate_candidates(spec, base)
        op.set_output(f"{len(instances)} candidates")

    with tracer.stage("metrics", f"{len(instances)} candidates") as op:
        candidates = []
        for instance in instances:
            solve_time = measure_solve_time(instance, default_time_limit, config) if measure_times else None
            candidates.append(CandidateRecord(
                instance=instance,
                solve_time_seconds=solve_time,
                similarity_to_base=masked_similarity(instance, reference, recipe_mask),
            ))
        op.set_metadata(measured_times=measure_times)

    with tracer.stage("select", f"target={spec.series_length}") as op:
        manifest, selected = assemble_series(
            candidates,
            target=spec.series_length,
            time_band=time_band,
            similarity_band=similarity_band,
            mask=mask,
            series_name=series_name,
            seed=spec.seed,
            base_instance=base_instance,
            recipe=spec.recipe.value,
            parameters=spec.parameters,
            default_time_limit=default_time_limit,
            config=config.generation,
        )
        op.set_output(f"{len(selected)} instances, time limit {manifest.time_limit_seconds}s")

    return manifest, selected


def write_series(
    out_dir: Path,
    manifest: SeriesManifest,
    instances: Sequence[Instance],
    dialect: MpsDialect = FREE
) -> Path:
    """Write instance files and manifest.json into out_dir; returns the manifest path."""
    out_dir = Path(out_dir)
    if len(instances) != len(manifest.instance_files):
        raise InvalidInputError(
            f"manifest lists {len(manifest.instance_files)} files but {len(instances)} instances were given"
        )
    for name, instance in zip(manifest.instance_files, instances):
        write_mps_file(instance, out_dir / name, dialect)
    manifest_path = out_dir / MANIFEST_NAME
    try:
        manifest_path.write_text(manifest.to_json(), encoding="utf-8")
    except OSError as e:
        raise RunIOError(manifest_path, f"cannot write manifest: {e}")
    return manifest_path


@dataclass
class SeriesCheckReport:
    """Result of check_series."""
    instance_count: int = 0
    problems: List[str] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems


def check_series(
    manifest_path: Path,
    dialect: MpsDialect = FREE,
    expected_length: int = 50
) -> SeriesCheckReport:
    """Re-parse a series and verify its structural contract.

    Every instance must match the first in variable/row counts, names, order
    and kinds, and may differ only in components of the manifest's mask.
    """
    manifest = SeriesManifest.load(manifest_path)
    mask = VariationMask.of(*manifest.variation_mask)
    report = SeriesCheckReport(instance_count=len(manifest.instance_files))
    if report.instance_count != expected_length:
        report.notes.append(
            f"series has {report.instance_count} instances, expected {expected_length}"
        )

    first: Optional[Instance] = None
    for position, path in enumerate(manifest.instance_paths(manifest_path), start=1):
        instance = read_mps_file(path, dialect)
        if first is None:
            first = instance
            continue
        diff = diff_instances(first, instance)
        for problem in diff.structural:
            report.problems.append(f"instance {position}: {problem}")
        outside = diff.outside(mask)
        if outside:
            names = sorted(c.value for c in outside)
            report.problems.append(f"instance {position}: components outside the mask changed: {names}")
    return report
