"""Consumption-pattern classification over multi-day window history.

Every clock window is labeled Low, Stable, or Mutable from its per-day
totals: Low when at least 6/7 of the observed span stayed under the 15 L
night-flow ceiling, otherwise Stable or Mutable depending on whether the
daily totals scatter less than 20/3 L around their mean.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from datetime import date, timedelta
from enum import Enum

from .errors import InsufficientDays, LearningIncomplete
from .metering import (
    CLASSIFIER_INTERVAL_MIN,
    MINUTES_PER_DAY,
    DayWindow,
    SampleGroup,
    tile_day,
)

#: A day counts as "low" for a window when its total stays at or under this.
LOW_DAY_LIMIT_L = 15.0
#: Fraction of the observed day span that must be low for a Low label.
LOW_SPAN_FRACTION = 6.0 / 7.0
#: Stable/Mutable cut on the sample std of daily totals, liters.
STABILITY_STD_LIMIT_L = 20.0 / 3.0
#: Length of the primary learning period, days.
LEARNING_PERIOD_DAYS = 14
#: Minimum observed days before a window can be classified.
MIN_CLASSIFICATION_DAYS = 7


class PatternClass(Enum):
    LOW = "Low"
    STABLE = "Stable"
    MUTABLE = "Mutable"


@dataclass
class DailyTotals:
    """Per-day totals z_i for one window over the observed days."""

    window: DayWindow
    totals: list[float]

    @property
    def mean(self) -> float:
        return statistics.fmean(self.totals) if self.totals else 0.0

    @property
    def std(self) -> float:
        """Sample standard deviation (n-1); kept alongside the mean even
        though only the spread enters the stability rule."""
        if len(self.totals) < 2:
            return 0.0
        return statistics.stdev(self.totals)


@dataclass
class LearningState:
    """Progress through the two-week primary learning period."""

    start_date: date | None = None
    elapsed_days: int = 0

    @property
    def in_learning(self) -> bool:
        return self.elapsed_days < LEARNING_PERIOD_DAYS


def is_low_day(group: SampleGroup) -> int:
    """1 when the group's total is at or under the 15 L ceiling, else 0."""
    return 1 if group.total() <= LOW_DAY_LIMIT_L else 0


def low_span_threshold(observed_days: int) -> float:
    """Low-day count required over a span of `observed_days` observations.

    The span is the day-index difference, one less than the observation
    count; missing days drop out of both the count and the span.
    """
    return LOW_SPAN_FRACTION * (observed_days - 1)


def classify_low(low_flags) -> bool:
    """True when enough of the observed span was low-consumption.

    `low_flags` holds one 0/1 flag per observed day, oldest first.
    """
    flags = list(low_flags)
    if len(flags) < MIN_CLASSIFICATION_DAYS:
        raise InsufficientDays(
            f"need {MIN_CLASSIFICATION_DAYS} observed days, have {len(flags)}"
        )
    return sum(flags) >= low_span_threshold(len(flags))


def classify_stability(totals: DailyTotals) -> PatternClass:
    """Stable when daily totals cluster tighter than 20/3 L (sample std)."""
    if len(totals.totals) < 2:
        raise InsufficientDays("need at least 2 daily totals for the stability rule")
    if totals.std < STABILITY_STD_LIMIT_L:
        return PatternClass.STABLE
    return PatternClass.MUTABLE


def classify_totals(window: DayWindow, day_totals) -> PatternClass:
    """Full label for one window from its per-day totals."""
    totals = DailyTotals(window=window, totals=list(day_totals))
    flags = [1 if t <= LOW_DAY_LIMIT_L else 0 for t in totals.totals]
    if classify_low(flags):
        return PatternClass.LOW
    return classify_stability(totals)


def window_day_totals(
    history, window: DayWindow, it: int = CLASSIFIER_INTERVAL_MIN
) -> list[float]:
    """Per-day group totals for a window, skipping unavailable days.

    `history` maps date -> 1440 per-minute volumes (None marks a missing
    minute). Group membership includes the closing boundary sample, so the
    summed range runs IT minutes past the window end, drawing the overflow
    from the next calendar day when needed.
    """
    days = sorted(history)
    totals: list[float] = []
    end = window.end_offset + it
    for d in days:
        minutes = list(history[d][window.start_offset:min(end, MINUTES_PER_DAY)])
        if end > MINUTES_PER_DAY:
            nxt = history.get(d + timedelta(days=1))
            if nxt is None:
                continue
            minutes.extend(nxt[: end - MINUTES_PER_DAY])
        if len(minutes) < end - window.start_offset or any(m is None for m in minutes):
            continue
        totals.append(sum(minutes))
    return totals


def classify_window(
    history, window: DayWindow, it: int = CLASSIFIER_INTERVAL_MIN
) -> PatternClass:
    """Classify one window from multi-day history."""
    return classify_totals(window, window_day_totals(history, window, it))


def pattern_schedule(
    history, stp, it: int = CLASSIFIER_INTERVAL_MIN
) -> dict[DayWindow, PatternClass]:
    """Label every tiling window of every configured length.

    Requires the primary learning period to be complete. Lengths that do
    not divide the day get a shorter final remainder window so coverage
    stays total.
    """
    if len(history) < LEARNING_PERIOD_DAYS:
        raise LearningIncomplete(
            f"{len(history)} days of history, learning needs {LEARNING_PERIOD_DAYS}"
        )
    schedule: dict[DayWindow, PatternClass] = {}
    for length in stp:
        for window in tile_day(length):
            if window not in schedule:
                schedule[window] = classify_window(history, window, it)
    return schedule
