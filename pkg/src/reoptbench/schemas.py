"""Pydantic schemas for manifests, outcomes, scores and run records."""

import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from reoptbench.errors import InvalidInputError, RunIOError
from reoptbench.model.instance import COMPONENT_ORDER, Component


def _reject_nan(value: Optional[float]) -> Optional[float]:
    if value is not None and math.isnan(value):
        raise ValueError("NaN is not allowed")
    return value


class RunStatus(str, Enum):
    """Termination status reported for one instance."""
    OPTIMAL = "optimal"
    TIMEOUT_INCUMBENT = "timeout_incumbent"
    TIMEOUT_NOFEAS = "timeout_nofeas"
    ERROR = "error"


class SolveOutcome(BaseModel):
    """Result of solving one instance, as seen by the scorer."""
    time_spent_seconds: float = Field(ge=0.0, description="Wall-clock time spent on the instance")
    time_limit_seconds: float = Field(gt=0.0, description="Per-instance time limit")
    solved_to_optimality: bool = Field(default=False, description="Solver claims a proven optimum")
    primal_bound: Optional[float] = Field(default=None, description="Objective of the best feasible solution")
    dual_bound: Optional[float] = Field(default=None, description="Proven bound on the optimal value")
    has_feasible_solution: bool = Field(default=False, description="A feasible solution was returned")
    stopped_early_without_zero_gap: bool = Field(
        default=False,
        description="Solver gave up before the time limit without closing the gap"
    )

    @field_validator("primal_bound", "dual_bound")
    @classmethod
    def _no_nan(cls, value: Optional[float]) -> Optional[float]:
        return _reject_nan(value)

    @model_validator(mode="after")
    def _consistent(self) -> "SolveOutcome":
        if self.solved_to_optimality and not self.has_feasible_solution:
            raise ValueError("solved_to_optimality requires a feasible solution")
        if self.primal_bound is None and self.has_feasible_solution:
            raise ValueError("a feasible solution needs a primal bound")
        return self


class ScoreRecord(BaseModel):
    """Score of one team on one instance: f = reltime + gap + nofeas."""
    series: str
    instance: int = Field(ge=1)
    reltime: float = Field(ge=0.0)
    gap: float = Field(ge=0.0, le=1.0)
    nofeas: Literal[0, 1]
    f: float
    valid: bool = True

    @model_validator(mode="after")
    def _sum(self) -> "ScoreRecord":
        total = self.reltime + self.gap + self.nofeas
        if abs(self.f - total) > 1e-12 * max(1.0, abs(total)):
            raise ValueError(f"f={self.f} differs from reltime + gap + nofeas = {total}")
        return self


class SeriesManifest(BaseModel):
    """A generated series: ordered instance files plus how they were made."""
    series_name: str
    instance_files: List[str] = Field(description="Instance paths, relative to the manifest directory")
    variation_mask: List[str] = Field(description="Components allowed to vary, canonical order")
    time_limit_seconds: float = Field(gt=0.0)
    seed: int = Field(ge=0, lt=2 ** 64)
    base_instance: str = Field(description="Base MPS path or 'synthetic'")
    recipe: str = ""
    parameters: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("variation_mask")
    @classmethod
    def _mask(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("variation mask must not be empty")
        flags = {Component(flag) for flag in value}
        return [c.value for c in COMPONENT_ORDER if c in flags]

    @field_validator("instance_files")
    @classmethod
    def _files(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("a series needs at least one instance")
        return value

    def to_json(self) -> str:
        """Canonical JSON text: sorted keys, stable across runs."""
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"

    @classmethod
    def load(cls, path: Path) -> "SeriesManifest":
        try:
            with open(path, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise RunIOError(path, f"cannot read manifest: {e}")
        try:
            return cls.model_validate_json(text)
        except ValidationError as e:
            raise InvalidInputError(f"{path}: invalid manifest: {e}")

    def instance_paths(self, manifest_path: Path) -> List[Path]:
        """Absolute instance paths resolved against the manifest's directory."""
        root = Path(manifest_path).resolve().parent
        return [root / name for name in self.instance_files]


class RunLimits(BaseModel):
    """Resource limits of one series run."""
    per_instance_time_limit_seconds: float = Field(gt=0.0)
    total_budget_seconds: float = Field(gt=0.0)
    memory_limit_bytes: int = Field(default=16 * 1024 ** 3, gt=0)
    thread_limit: Literal[1] = 1

    @model_validator(mode="after")
    def _budget(self) -> "RunLimits":
        if self.total_budget_seconds < self.per_instance_time_limit_seconds:
            raise ValueError("total budget must be at least the per-instance time limit")
        return self


class EventKind(str, Enum):
    SERIES_START = "series_start"
    INSTANCE_BEGIN = "instance_begin"
    INSTANCE_END = "instance_end"
    SERIES_END = "series_end"


class RunEvent(BaseModel):
    """One protocol event emitted by the solver."""
    kind: EventKind
    instance_index: int = Field(default=0, ge=0, description="0 for series events")
    timestamp: float = Field(description="Solver-side monotonic seconds")
    received_at: Optional[float] = Field(default=None, description="Harness monotonic receive time")
    line: int = Field(default=0, description="Line number in the solver's output")
    primal_bound: Optional[float] = None
    dual_bound: Optional[float] = None
    status: Optional[RunStatus] = None
    solution_path: Optional[str] = None


class InstanceResult(BaseModel):
    """Harness view of one instance: outcome, status and audit verdict."""
    index: int = Field(ge=1)
    instance_file: str
    status: RunStatus
    outcome: SolveOutcome
    solution_path: Optional[str] = None
    valid: bool = True
    audit_notes: List[str] = Field(default_factory=list)
    synthesized: bool = Field(default=False, description="No end event; filled in by the harness")


class SeriesRunRecord(BaseModel):
    """Everything recorded about one series run."""
    manifest_path: str
    series_name: str
    solver_command: List[str]
    limits: RunLimits
    enforcement: Dict[str, str] = Field(default_factory=dict)
    events: List[RunEvent] = Field(default_factory=list)
    results: List[InstanceResult] = Field(default_factory=list)
    protocol_violations: List[str] = Field(default_factory=list)

    @property
    def outcomes(self) -> List[SolveOutcome]:
        return [r.outcome for r in self.results]
