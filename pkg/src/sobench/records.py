"""Per-run iteration traces shared by both optimizers and the bench driver."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RunRecord:
    """Trace of one optimizer run.

    ``iterations`` counts from 1; ``elapsed_ns`` is cumulative from run
    start (monotonic clock, instance generation excluded). ``objectives``
    holds the recorded objective of the iterate produced at each step.
    """

    task: str
    size: int
    backend: str
    rep: int
    seed: int
    iterations: np.ndarray
    objectives: np.ndarray
    elapsed_ns: np.ndarray
    final_iterate: np.ndarray
    warnings: list[str] = field(default_factory=list)

    @property
    def final_objective(self) -> float:
        return float(self.objectives[-1])

    def objective_at(self, iteration: int) -> float:
        """Objective at a 1-based iteration index."""
        if not 1 <= iteration <= self.iterations.size:
            raise IndexError(f"iteration {iteration} outside trace of length {self.iterations.size}")
        return float(self.objectives[iteration - 1])


class TraceBuilder:
    """Accumulates per-iteration rows; cheap append, arrays on finish."""

    def __init__(self):
        self._iters: list[int] = []
        self._objs: list[float] = []
        self._ns: list[int] = []
        self.warnings: list[str] = []

    def append(self, iteration: int, objective: float, elapsed_ns: int) -> None:
        self._iters.append(iteration)
        self._objs.append(objective)
        self._ns.append(elapsed_ns)

    def __len__(self) -> int:
        return len(self._iters)

    def build(self, task, size, backend, rep, seed, final_iterate) -> RunRecord:
        return RunRecord(
            task=task,
            size=size,
            backend=backend,
            rep=rep,
            seed=seed,
            iterations=np.asarray(self._iters, dtype=np.int64),
            objectives=np.asarray(self._objs, dtype=np.float64),
            elapsed_ns=np.asarray(self._ns, dtype=np.int64),
            final_iterate=final_iterate,
            warnings=list(self.warnings),
        )
