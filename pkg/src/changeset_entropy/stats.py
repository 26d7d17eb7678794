"""Correlation, z-band grouping, quantiles and Tukey outlier fences."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")

TUKEY_K = 1.5


class UndefinedCorrelationError(ValueError):
    pass


class ZeroVarianceError(ValueError):
    pass


def mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def sample_std(values: Sequence[float]) -> float:
    m = mean(values)
    return math.sqrt(math.fsum((v - m) ** 2 for v in values) / (len(values) - 1))


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise UndefinedCorrelationError(f"need at least 2 points, got {len(x)}")
    mx, my = mean(x), mean(y)
    dx = [v - mx for v in x]
    dy = [v - my for v in y]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("zero variance input")
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def pearson_or_none(x: Sequence[float], y: Sequence[float]) -> float | None:
    try:
        return pearson(x, y)
    except UndefinedCorrelationError:
        return None


def quantile(sorted_values: Sequence[float], q: float) -> float:
    """Linear interpolation between order statistics (R type 7)."""
    if not sorted_values:
        raise ValueError("quantile of empty sequence")
    h = (len(sorted_values) - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, len(sorted_values) - 1)
    return sorted_values[lo] + (h - lo) * (sorted_values[hi] - sorted_values[lo])


@dataclass(frozen=True)
class BoxSummary:
    min: float
    q1: float
    median: float
    q3: float
    max: float
    count: int

    def as_dict(self) -> dict:
        return {"min": self.min, "q1": self.q1, "median": self.median, "q3": self.q3, "max": self.max, "count": self.count}


def box_summary(values: Sequence[float]) -> BoxSummary:
    if not values:
        raise ValueError("box_summary of empty sequence")
    s = sorted(values)
    return BoxSummary(s[0], quantile(s, 0.25), quantile(s, 0.5), quantile(s, 0.75), s[-1], len(s))


@dataclass
class GroupedEntropies:
    low: list[tuple[str, float]] = field(default_factory=list)
    medium: list[tuple[str, float]] = field(default_factory=list)
    high: list[tuple[str, float]] = field(default_factory=list)
    mean_abs_delta: float = 0.0
    std_abs_delta: float = 0.0
    # revision -> z-score of |delta|
    z_scores: dict[str, float] = field(default_factory=dict)

    @property
    def thresholds(self) -> tuple[float, float]:
        return (self.mean_abs_delta, self.std_abs_delta)

    def groups(self) -> dict[str, list[tuple[str, float]]]:
        return {"low": self.low, "medium": self.medium, "high": self.high}


def band(z: float) -> str:
    # z < -1 folds into "low" so the three bands partition the line
    if z <= 0:
        return "low"
    if z <= 1:
        return "medium"
    return "high"


def group_by_abs_delta(records: Sequence[tuple[str, float, float]]) -> GroupedEntropies:
    """Split ``(revision, entropy, delta)`` records into low/medium/high bands.

    z = (|delta| - mean|delta|) / sample-std|delta|; low z <= 0,
    medium 0 < z <= 1, high z > 1.
    """
    if len(records) < 2:
        raise ValueError(f"need at least 2 records to group, got {len(records)}")
    absd = [abs(d) for _, _, d in records]
    m = mean(absd)
    sd = sample_std(absd)
    if sd == 0:
        raise ZeroVarianceError("all absolute deltas are equal")
    out = GroupedEntropies(mean_abs_delta=m, std_abs_delta=sd)
    for (rev, h, _), a in zip(records, absd):
        z = (a - m) / sd
        out.z_scores[rev] = z
        getattr(out, band(z)).append((rev, h))
    return out


@dataclass(frozen=True)
class Fences:
    lower: float
    upper: float


def tukey_fences(values: Sequence[float], k: float = TUKEY_K) -> Fences:
    s = sorted(values)
    q1, q3 = quantile(s, 0.25), quantile(s, 0.75)
    iqr = q3 - q1
    return Fences(q1 - k * iqr, q3 + k * iqr)


def filter_entropy_outliers(
    records: Sequence[T], key: Callable[[T], float] = lambda r: r[1], k: float = TUKEY_K
) -> tuple[list[T], list[T]]:
    """Split records into (kept, flagged) by Tukey fences on ``key(record)``.

    Fences are inclusive: a value exactly on a fence is kept.  With fewer
    than four records the fences are not meaningful and nothing is flagged.
    """
    if len(records) < 4:
        return list(records), []
    f = tukey_fences([key(r) for r in records], k)
    kept, flagged = [], []
    for r in records:
        (kept if f.lower <= key(r) <= f.upper else flagged).append(r)
    return kept, flagged
