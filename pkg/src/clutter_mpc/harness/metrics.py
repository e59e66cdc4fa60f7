"""Table-style metrics over trial results, and the threshold/force correlation."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .reach import TrialResult

__all__ = ["AggregateReport", "aggregate", "pearson"]


@dataclass(frozen=True)
class AggregateReport:
    n_trials: int
    n_successes: int
    success_rate: float
    avg_max_force: float
    avg_force: float
    median_force: float
    q1_force: float
    q3_force: float
    n_samples: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def aggregate(results: Iterable[TrialResult]) -> AggregateReport:
    """Success rate, mean per-trial peak force and statistics of the pooled nonzero samples."""
    results = list(results)
    if not results:
        raise ValueError("aggregate needs at least one trial result")
    successes = sum(r.success for r in results)
    samples = np.array([f for r in results for f in r.forces if f > 0.0], dtype=float)
    if samples.size:
        q1, med, q3 = np.percentile(samples, [25, 50, 75])
        avg = float(samples.mean())
    else:
        q1 = med = q3 = avg = 0.0
    return AggregateReport(
        n_trials=len(results),
        n_successes=int(successes),
        success_rate=successes / len(results),
        avg_max_force=float(np.mean([r.max_force for r in results])),
        avg_force=avg,
        median_force=float(med),
        q1_force=float(q1),
        q3_force=float(q3),
        n_samples=int(samples.size),
    )


def pearson(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Pearson correlation, or None when either series has zero variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("pearson needs two equal-length series of at least two values")
    dx = x - x.mean()
    dy = y - y.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        return None
    return float(dx @ dy) / denom
