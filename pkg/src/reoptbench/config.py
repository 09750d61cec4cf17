"""Configuration management for reoptbench."""

import os
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml


@dataclass
class FeasibilityConfig:
    """Feasibility tolerances.

    Row and bound violations are scaled by (1 + |side|) before comparison.
    """
    row_tolerance: float = 1e-6
    bound_tolerance: float = 1e-6
    integrality_tolerance: float = 1e-5


@dataclass
class GenerationConfig:
    """Series generation configuration."""
    series_length: int = 50
    candidate_count: int = 50
    # Synthetic semicontinuous generator ranges (recorded in manifests)
    matrix_range: Tuple[float, float] = (-10.0, 10.0)
    matrix_density: float = 0.2
    objective_range: Tuple[float, float] = (1.0, 10.0)
    bound_range: Tuple[float, float] = (0.0, 10.0)
    rhs_range: Tuple[float, float] = (-10.0, 30.0)
    # Time limit = multiplier * median solve time, rounded up to granularity
    time_limit_multiplier: float = 2.0
    time_limit_granularity: float = 10.0


@dataclass
class ScoringConfig:
    """Scoring audit tolerances."""
    optimality_gap_tolerance: float = 1e-6
    dual_bound_tolerance: float = 1e-6


@dataclass
class HarnessConfig:
    """Harness resource limits and process handling."""
    memory_limit_bytes: int = 16 * 1024 ** 3
    thread_limit: int = 1
    budget_multiplier: float = 50.0
    kill_grace_seconds: float = 5.0


@dataclass
class OracleConfig:
    """Enumeration oracle configuration."""
    domain_cap: int = 2 ** 24
    batch_size: int = 4096


@dataclass
class ReoptConfig:
    """Baseline reoptimizing solver configuration."""
    pool_size: int = 5
    cutoff_slack: float = 1e-9


@dataclass
class Config:
    """Main configuration class."""
    feasibility: FeasibilityConfig = field(default_factory=FeasibilityConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    reopt: ReoptConfig = field(default_factory=ReoptConfig)

    # Paths
    artifacts_dir: str = "./artifacts"
    recipes_dir: str = "./recipes"

    @classmethod
    def from_yaml(cls, path: Path) -> "Config":
        """Create config from a YAML file with the same nesting as the dataclasses."""
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
        if not isinstance(data, dict):
            raise ValueError(f"{path}: configuration must be a mapping")
        config = cls()
        _merge(config, data, str(path))
        return config

    @classmethod
    def from_env(cls, base: Optional["Config"] = None) -> "Config":
        """Apply environment variables on top of a config (defaults if None).

        Supported environment variables:
        - REOPTBENCH_ARTIFACTS_DIR: where traces are written
        - REOPTBENCH_RECIPES_DIR: where series presets are looked up
        - REOPTBENCH_ORACLE_DOMAIN_CAP: enumeration cap of the oracle
        - REOPTBENCH_MEMORY_LIMIT_BYTES: solver memory limit for the harness
        """
        config = base or cls()

        artifacts_dir = os.environ.get("REOPTBENCH_ARTIFACTS_DIR")
        if artifacts_dir:
            config.artifacts_dir = artifacts_dir

        recipes_dir = os.environ.get("REOPTBENCH_RECIPES_DIR")
        if recipes_dir:
            config.recipes_dir = recipes_dir

        domain_cap = os.environ.get("REOPTBENCH_ORACLE_DOMAIN_CAP")
        if domain_cap:
            config.oracle.domain_cap = int(domain_cap)

        memory_limit = os.environ.get("REOPTBENCH_MEMORY_LIMIT_BYTES")
        if memory_limit:
            config.harness.memory_limit_bytes = int(memory_limit)

        return config

    @classmethod
    def load(cls, path: Optional[Path] = None) -> "Config":
        """Defaults, then the optional YAML file, then the environment.

        CLI flags are applied by the caller afterwards and win over all three.
        """
        config = cls.from_yaml(path) if path else cls()
        return cls.from_env(config)

    def get_recipe_preset(self, name: str) -> Dict[str, Any]:
        """Load a series preset (recipe, parameters, mask, time limit) by name."""
        preset_path = Path(self.recipes_dir) / f"{name}.yaml"
        if not preset_path.exists():
            bundled = Path(__file__).resolve().parents[2] / "recipes" / f"{name}.yaml"
            if not bundled.exists():
                raise FileNotFoundError(f"No series preset named '{name}' in {self.recipes_dir}")
            preset_path = bundled

        with open(preset_path, "r", encoding="utf-8") as f:
            return yaml.safe_load(f)


def _merge(target: Any, data: Dict[str, Any], origin: str) -> None:
    known = {f.name: f for f in fields(target)}
    for key, value in data.items():
        if key not in known:
            raise ValueError(f"{origin}: unknown configuration key '{key}'")
        current = getattr(target, key)
        if is_dataclass(current):
            if not isinstance(value, dict):
                raise ValueError(f"{origin}: section '{key}' must be a mapping")
            _merge(current, value, origin)
        elif isinstance(current, tuple):
            setattr(target, key, tuple(float(v) for v in value))
        else:
            setattr(target, key, type(current)(value))
