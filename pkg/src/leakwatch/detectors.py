"""Detection criteria and alert primitives.

Three live checks feed the engine: the zero-flow short-circuit (no leak
can exist while nothing flows), the strict deviation comparison against a
window's ceiling, and the steady-consumption median filter that catches a
constant leak riding under normal household draws.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum

from .errors import InsufficientCoverage, InterruptedFlow
from .metering import FlowSample, format_timestamp


class Criterion(Enum):
    AVERAGE_DEVIATION = "AverageDeviation"
    STEADY_CONSUMPTION = "SteadyConsumption"


class AlertState(Enum):
    POTENTIAL = "Potential"
    CONFIRMED = "Confirmed"
    CLEARED_BY_ZERO_FLOW = "ClearedByZeroFlow"
    EXPIRED = "Expired"
    JUDGED_FALSE = "JudgedFalse"
    JUDGED_REAL = "JudgedReal"


#: Legal lifecycle moves. Expired is the quiet end of a potential whose
#: longer-horizon window came back under the ceiling.
_TRANSITIONS = {
    AlertState.POTENTIAL: {
        AlertState.CONFIRMED,
        AlertState.CLEARED_BY_ZERO_FLOW,
        AlertState.EXPIRED,
    },
    AlertState.CONFIRMED: {AlertState.JUDGED_FALSE, AlertState.JUDGED_REAL},
}


@dataclass
class AlertRecord:
    """One alert through its lifecycle.

    Span, measured, and threshold describe the window that raised the
    alert; the confirm_* fields record the longer-horizon window that
    upgraded it.
    """

    id: int
    criterion: Criterion
    state: AlertState
    span_start: datetime
    span_end: datetime
    measured: float
    threshold: float
    raised_at: datetime
    horizon: tuple | None = None  # (T1, T2) for deviation alerts
    window: object = None  # originating DayWindow for deviation alerts
    confirm_span: tuple | None = None
    confirm_measured: float | None = None
    confirm_threshold: float | None = None

    def transition(self, new_state: AlertState) -> None:
        allowed = _TRANSITIONS.get(self.state, set())
        if new_state not in allowed:
            raise ValueError(f"illegal alert transition {self.state} -> {new_state}")
        self.state = new_state

    @property
    def is_open(self) -> bool:
        return self.state in (AlertState.POTENTIAL, AlertState.CONFIRMED)


@dataclass(frozen=True)
class AlertEvent:
    """One recorded lifecycle transition, as written to the report."""

    id: int
    criterion: Criterion
    state: AlertState
    span_start: datetime
    span_end: datetime
    measured: float
    threshold: float
    timestamp: datetime

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "criterion": self.criterion.value,
            "state": self.state.value,
            "span": [format_timestamp(self.span_start), format_timestamp(self.span_end)],
            "measured": round(self.measured, 6),
            "threshold": round(self.threshold, 6),
            "timestamp": format_timestamp(self.timestamp),
        }


@dataclass
class DetectorConfig:
    """Detection knobs. None of these are dictated by the model itself;
    all are exposed in the engine config file."""

    pseudo_zero: float = 0.1  # liters: at or under this counts as no flow
    zero_window: int = 2  # minutes of pseudo-zero that clear potentials
    sd: float = 0.05  # slight-deviation fraction around the median
    steady_window: int = 120  # minutes of uninterrupted flow to test
    steady_min_flow: float = 0.2  # liters per interval: span continuity floor
    horizon_pairs: list = field(default_factory=lambda: [(15, 30)])
    fire_alarm_suppressed: bool = False

    def __post_init__(self):
        if not 0 < self.sd < 1:
            raise ValueError(f"sd must be in (0, 1), got {self.sd}")
        if self.pseudo_zero < 0:
            raise ValueError("pseudo_zero must be >= 0")
        if self.zero_window <= 0 or self.steady_window <= 0:
            raise ValueError("windows must be positive")
        for t1, t2 in self.horizon_pairs:
            if t1 >= t2:
                raise ValueError(f"horizon pair ({t1}, {t2}) needs T1 < T2")


def check_zero_flow(flows: list, cfg: DetectorConfig) -> bool:
    """True when the recent window saw at most pseudo-zero consumption.

    `flows` must be contiguous FlowSamples covering exactly
    cfg.zero_window minutes.
    """
    covered = 0
    prev_end = None
    for f in flows:
        if not isinstance(f, FlowSample):
            raise InsufficientCoverage("window contains a missing interval")
        if prev_end is not None and f.interval_start != prev_end:
            raise InsufficientCoverage("window samples are not contiguous")
        prev_end = f.interval_end
        covered += f.interval_length
    if covered != cfg.zero_window:
        raise InsufficientCoverage(
            f"covered {covered} min, zero window needs {cfg.zero_window}"
        )
    return sum(f.volume for f in flows) <= cfg.pseudo_zero


def check_deviation(window_consumption: float, threshold: float) -> bool:
    """Deviation fires only on a strict exceedance of the ceiling."""
    return window_consumption > threshold


def in_band_fraction(volumes, sd: float) -> float:
    """Fraction of samples inside the closed median band [med*(1-sd), med*(1+sd)]."""
    vols = list(volumes)
    med = statistics.median(vols)
    lo, hi = med - med * sd, med + med * sd
    return sum(1 for v in vols if lo <= v <= hi) / len(vols)


def check_steady(samples, cfg: DetectorConfig) -> bool:
    """Steady-consumption test: majority of samples hug their median.

    `samples` may be FlowSamples or raw per-interval volumes; every sample
    must stay at or above the continuity floor, otherwise the span was
    interrupted and the test is meaningless.
    """
    vols = [s.volume if isinstance(s, FlowSample) else float(s) for s in samples]
    if not vols:
        raise InterruptedFlow("no samples")
    if any(v < cfg.steady_min_flow for v in vols):
        raise InterruptedFlow(
            f"sample below continuity floor {cfg.steady_min_flow} L/interval"
        )
    return in_band_fraction(vols, cfg.sd) > 0.5
