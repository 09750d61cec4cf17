"""Base solver backend interface for reoptbench."""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from reoptbench.model.instance import Instance, Sense, Solution
from reoptbench.schemas import RunStatus, SolveOutcome


@dataclass(frozen=True)
class BackendResult:
    """Outcome of one backend solve plus the returned solution."""
    outcome: SolveOutcome
    solution: Optional[Solution]
    status: RunStatus


def no_bound(sense: Sense) -> float:
    """Trivial dual bound: -inf when minimizing, +inf when maximizing."""
    return -math.inf if sense is Sense.MINIMIZE else math.inf


def infeasible_bound(sense: Sense) -> float:
    """Dual bound proving infeasibility: +inf when minimizing, -inf when maximizing."""
    return math.inf if sense is Sense.MINIMIZE else -math.inf


class Backend(ABC):
    """Abstract base class for exact solvers driven by the reopt baseline."""

    name: str = "backend"

    @abstractmethod
    def solve(
        self,
        instance: Instance,
        time_limit: float,
        warm_start: Optional[Solution] = None,
        cutoff: Optional[float] = None,
        instance_path: Optional[Path] = None,
    ) -> BackendResult:
        """Solve an instance within a time limit.

        Args:
            instance: Instance to solve
            time_limit: Seconds available; backends respect it within 10%
            warm_start: Feasible solution to start from
            cutoff: Only solutions strictly better than this objective are
                of interest
            instance_path: File the instance was read from, for backends
                that work on files

        Returns:
            BackendResult

        Raises:
            BackendError: the backend failed to produce an outcome
        """
        pass
