"""Windowed consumption statistics and the upper critical value.

Each clock-anchored window accumulates one observation per day. The
detection threshold builds on the right-tailed confidence bound for the
window mean: K = mean + t(df, 1-alpha) * std / sqrt(n), switching to the
normal z-score once the sample is large (n > 30).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import InsufficientSamples
from .metering import DayWindow

#: One-sided Student-t quantiles, df 1..30, pre-calculated from standard
#: references (cross-checked against numeric CDF inversion in the tests).
_T_095 = (
    6.314, 2.920, 2.353, 2.132, 2.015, 1.943, 1.895, 1.860, 1.833, 1.812,
    1.796, 1.782, 1.771, 1.761, 1.753, 1.746, 1.740, 1.734, 1.729, 1.725,
    1.721, 1.717, 1.714, 1.711, 1.708, 1.706, 1.703, 1.701, 1.699, 1.697,
)
_T_099 = (
    31.821, 6.965, 4.541, 3.747, 3.365, 3.143, 2.998, 2.896, 2.821, 2.764,
    2.718, 2.681, 2.650, 2.624, 2.602, 2.583, 2.567, 2.552, 2.539, 2.528,
    2.518, 2.508, 2.500, 2.492, 2.485, 2.479, 2.473, 2.467, 2.462, 2.457,
)
_Z = {0.95: 1.645, 0.99: 2.326}

ALLOWED_ALPHA = (0.01, 0.05)
T_TABLE_MAX_DF = 30


class CriticalValueTable:
    """Pre-calculated one-sided t-scores (df 1..30) and z-scores."""

    def __init__(self, t_scores: dict | None = None, z_scores: dict | None = None):
        if t_scores is None:
            t_scores = {}
            for df in range(1, T_TABLE_MAX_DF + 1):
                t_scores[(df, 0.95)] = _T_095[df - 1]
                t_scores[(df, 0.99)] = _T_099[df - 1]
        self.t_scores = t_scores
        self.z_scores = dict(_Z) if z_scores is None else z_scores

    def t(self, df: int, confidence: float) -> float:
        try:
            return self.t_scores[(df, confidence)]
        except KeyError:
            raise KeyError(f"no t-score for df={df}, confidence={confidence}") from None

    def z(self, confidence: float) -> float:
        return self.z_scores[confidence]


DEFAULT_TABLE = CriticalValueTable()


@dataclass(frozen=True)
class WindowStats:
    """Running estimators for one window: count, mean, spread.

    `m2` is the running sum of squared deviations, kept so incremental
    updates reproduce the batch n-1 estimators exactly.
    """

    window: DayWindow | None = None
    n: int = 0
    mean: float = 0.0
    m2: float = 0.0
    alpha: float = 0.05

    def __post_init__(self):
        if self.alpha not in ALLOWED_ALPHA:
            raise ValueError(f"alpha must be one of {ALLOWED_ALPHA}, got {self.alpha}")
        if self.n < 0 or self.m2 < -1e-12:
            raise ValueError("negative count or squared-deviation sum")

    @property
    def std(self) -> float:
        """Sample standard deviation (n-1 denominator); 0 for n < 2."""
        if self.n < 2:
            return 0.0
        return math.sqrt(max(self.m2, 0.0) / (self.n - 1))

    @property
    def confidence(self) -> float:
        return 1.0 - self.alpha


def update_stats(stats: WindowStats, observation: float) -> WindowStats:
    """Fold one daily observation into the window estimators (Welford)."""
    if observation < 0:
        raise ValueError(f"negative observation: {observation}")
    n = stats.n + 1
    delta = observation - stats.mean
    mean = stats.mean + delta / n
    m2 = stats.m2 + delta * (observation - mean)
    return replace(stats, n=n, mean=mean, m2=m2)


def batch_stats(
    observations, window: DayWindow | None = None, alpha: float = 0.05
) -> WindowStats:
    """Build WindowStats from a full observation list in one pass."""
    stats = WindowStats(window=window, alpha=alpha)
    for x in observations:
        stats = update_stats(stats, x)
    return stats


def critical_value(
    stats: WindowStats, table: CriticalValueTable = DEFAULT_TABLE
) -> float:
    """Upper critical value K for the window mean (right-tailed).

    Uses the Student-t quantile at n-1 degrees of freedom; for n > 30 the
    z-score stands in for the t-score.
    """
    if stats.n < 2:
        raise InsufficientSamples(f"need n >= 2 observations, have {stats.n}")
    if stats.n > T_TABLE_MAX_DF:
        score = table.z(stats.confidence)
    else:
        score = table.t(stats.n - 1, stats.confidence)
    return stats.mean + score * stats.std / math.sqrt(stats.n)
