"""Deterministic household consumption simulator.

Generates labeled per-minute meter traces: a family's daily budget
(normal per-person draw plus a fixed base), rendered through a diurnal
schedule of slot-anchored draw events, plus injectable constant leaks,
air-pocket blips, and fire-flow surges.

All volumes are integer deciliters internally, so day totals conserve
exactly and emitted CSV bytes are reproducible across platforms. The
default schedule is shaped so that pattern classes are guaranteed by
construction: near-zero static night dribble, tightly jittered morning
and evening routines, and midday draws that alternate between two block
sets on even/odd days (home vs. mostly-out), which concentrates the
budget's day-to-day variance in the midday hours.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone

import numpy as np

from .errors import SpanMismatch
from .metering import (
    MINUTES_PER_DAY,
    DayWindow,
    FlowSample,
    format_timestamp,
)

DRAW_RATE_DL_MIN = 80  # nominal appliance draw rate, deciliters/minute


@dataclass(frozen=True)
class ScheduleEntry:
    """One diurnal consumption element.

    kind: 'dribble' spreads volume on a 5-minute grid (static placement);
    'draw' is a single contiguous draw jittered inside the window;
    'pulses' renders two short bursts with a dry gap between them.
    pool names which budget share feeds the entry; midday_even/midday_odd
    pools are only active on matching day parity.
    """

    window: DayWindow
    kind: str
    weight: float
    pool: str


def _morning_entries() -> list:
    weights = [0.04, 0.06, 0.05, 0.03, 0.05, 0.04, 0.03, 0.05, 0.52, 0.02, 0.08, 0.03]
    return [
        ScheduleEntry(DayWindow(360 + 15 * i, 15), "draw", w, "morning")
        for i, w in enumerate(weights)
    ]


def _evening_entries() -> list:
    spec = [
        (0, "draw", 0.10), (1, "draw", 0.05), (2, "draw", 0.15), (3, "draw", 0.04),
        (4, "pulses", 0.14), (5, "pulses", 0.14), (6, "draw", 0.05), (7, "draw", 0.04),
        (8, "draw", 0.08), (9, "draw", 0.06), (10, "draw", 0.10), (11, "draw", 0.05),
    ]
    return [
        ScheduleEntry(DayWindow(1200 + 15 * i, 15), kind, w, "evening")
        for i, kind, w in spec
    ]


def _midday_entries() -> list:
    entries = [
        ScheduleEntry(DayWindow(540, 15), "draw", 0.5, "midday_base"),
        ScheduleEntry(DayWindow(570, 15), "draw", 0.5, "midday_base"),
    ]
    even_blocks = (600, 840, 1080)  # 10:00, 14:00, 18:00
    odd_blocks = (720, 960)  # 12:00, 16:00
    for blocks, pool in ((even_blocks, "midday_even"), (odd_blocks, "midday_odd")):
        for block_start in blocks:
            for slot in range(8):
                entries.append(
                    ScheduleEntry(
                        DayWindow(block_start + 15 * slot, 15), "draw", 1.0, pool
                    )
                )
    return entries


def default_schedule() -> list:
    """The stock diurnal design; see module docstring for its guarantees."""
    night = [
        ScheduleEntry(DayWindow(0, 360), "dribble", 6.0, "night"),
        ScheduleEntry(DayWindow(1380, 60), "dribble", 1.0, "night"),
    ]
    return night + _morning_entries() + _midday_entries() + _evening_entries()


#: Pattern classes guaranteed by the default schedule, keyed
#: "start_offset:length". Only windows whose class is structural are
#: listed; everything else is left to the classifier.
def default_window_truth() -> dict:
    truth: dict = {}
    for length in (15, 30, 60, 120, 300):
        start = 0
        while start + length <= 360:
            truth[f"{start}:{length}"] = "Low"
            start += length
    for length in (15, 30, 60):
        start = 1380
        while start + length <= 1440:
            truth[f"{start}:{length}"] = "Low"
            start += length
    for start in (360, 420, 480):
        truth[f"{start}:60"] = "Stable"
    truth["360:120"] = "Stable"
    for start in (1200, 1260, 1320):
        truth[f"{start}:60"] = "Stable"
    truth["1200:120"] = "Stable"
    for start in (600, 720, 840, 960, 1080):
        truth[f"{start}:120"] = "Mutable"
    return truth


@dataclass
class HouseholdProfile:
    """Family consumption model: daily budget p*S + base, p ~ N(120, 20)."""

    family_size: int = 4
    p_mean: float = 120.0
    p_std: float = 20.0
    base_liters: float = 140.0
    seed: int = 7
    night_share: float = 0.03
    morning_share: float = 0.30
    evening_share: float = 0.27
    routine_jitter: float = 0.03  # +-3% day-to-day wobble on fixed routines
    schedule: list = field(default_factory=default_schedule)
    window_truth: dict = field(default_factory=default_window_truth)

    @property
    def expected_daily_total(self) -> float:
        return self.p_mean * self.family_size + self.base_liters


@dataclass(frozen=True)
class LeakSpec:
    """Constant-rate leak: liters/second over [start, end) (open end =
    until the trace runs out)."""

    rate_lps: float
    start: datetime
    end: datetime | None = None

    def __post_init__(self):
        if self.rate_lps < 0:
            raise ValueError("leak rate must be >= 0")

    @property
    def rate_dl_per_min(self) -> int:
        return round(self.rate_lps * 600)


@dataclass
class Trace:
    """A labeled minute-resolution consumption trace."""

    start: datetime
    volumes_dl: list  # int deciliters per minute
    leak: list  # bool per minute
    fire: list  # bool per minute
    air_pocket: list  # bool per minute
    window_truth: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.volumes_dl)

    def minute_index(self, ts: datetime) -> int:
        delta = ts - self.start
        idx = int(delta.total_seconds() // 60)
        if delta.total_seconds() % 60 != 0:
            raise SpanMismatch(f"{ts} is not on the trace's minute grid")
        return idx

    def total_liters(self) -> float:
        return sum(self.volumes_dl) / 10.0

    def to_flows(self) -> list:
        return [
            FlowSample(self.start + timedelta(minutes=i), 1, dl / 10.0)
            for i, dl in enumerate(self.volumes_dl)
        ]


def split_dl(total_dl: int, weights) -> list:
    """Apportion deciliters by weight, conserving the total exactly
    (largest-remainder, deterministic tie-break by position)."""
    weights = list(weights)
    if total_dl <= 0 or not weights:
        return [0] * len(weights)
    wsum = sum(weights)
    quotas = [total_dl * w / wsum for w in weights]
    base = [math.floor(q) for q in quotas]
    remainder = total_dl - sum(base)
    order = sorted(range(len(weights)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[:remainder]:
        base[i] += 1
    return base


def draw_daily_budget(profile: HouseholdProfile, rng) -> float:
    """One day's consumption budget in liters, floored at the fixed base."""
    p = rng.normal(profile.p_mean, profile.p_std)
    return max(profile.base_liters, p * profile.family_size + profile.base_liters)


def _render_dribble(day: np.ndarray, entry: ScheduleEntry, dl: int) -> None:
    slots = entry.window.length // 5
    per_slot = split_dl(dl, [1.0] * slots)
    for s, amount in enumerate(per_slot):
        if amount:
            day[entry.window.start_offset + 5 * s + 2] += amount


def _render_draw(day: np.ndarray, entry: ScheduleEntry, dl: int, rng) -> None:
    jitter = int(rng.integers(0, 3))  # always consumed, keeps streams aligned
    if dl <= 0:
        return
    # draws sit 6..8 minutes into their slot and end before it closes, so
    # a neighboring window's closing boundary sample never sees them and
    # slot jitter cannot leak variance across window edges
    length = entry.window.length
    duration = min(max(1, math.ceil(dl / DRAW_RATE_DL_MIN)), length - 8)
    start = entry.window.start_offset + 6 + jitter
    per_minute = split_dl(dl, [1.0] * duration)
    for m, amount in enumerate(per_minute):
        day[start + m] += amount


def _render_pulses(day: np.ndarray, entry: ScheduleEntry, dl: int) -> None:
    # two 3-minute pulses separated by a 4-minute dry gap: pulsed
    # appliances never build an uninterrupted span
    if dl <= 0:
        return
    halves = split_dl(dl, [1.0, 1.0])
    for p, amount in enumerate(halves):
        pulse_start = entry.window.start_offset + 7 * p
        for m, part in enumerate(split_dl(amount, [1.0, 1.0, 1.0])):
            day[pulse_start + m] += part


def render_day(
    profile: HouseholdProfile, budget_liters: float, day_index: int, rng
) -> np.ndarray:
    """Distribute one day's budget into 1440 per-minute deciliter volumes.

    Fixed routines (night/morning/evening) take their expected share with
    a small jitter; the midday pools absorb whatever the daily draw left,
    so the budget is conserved to the deciliter.
    """
    expected = profile.expected_daily_total
    budget_dl = round(budget_liters * 10)

    night_dl = round(profile.night_share * expected * 10)
    u_morning = rng.uniform(1 - profile.routine_jitter, 1 + profile.routine_jitter)
    u_evening = rng.uniform(1 - profile.routine_jitter, 1 + profile.routine_jitter)
    morning_dl = round(profile.morning_share * expected * 10 * u_morning)
    evening_dl = round(profile.evening_share * expected * 10 * u_evening)

    midday_dl = budget_dl - night_dl - morning_dl - evening_dl
    if midday_dl < 0:
        deficit = -midday_dl
        midday_dl = 0
        for name in ("evening", "morning", "night"):
            pool = {"evening": evening_dl, "morning": morning_dl, "night": night_dl}[name]
            take = min(pool, deficit)
            deficit -= take
            if name == "evening":
                evening_dl -= take
            elif name == "morning":
                morning_dl -= take
            else:
                night_dl -= take

    base_dl = round(midday_dl * 0.08)
    active_dl = midday_dl - base_dl
    active_pool = "midday_even" if day_index % 2 == 0 else "midday_odd"
    pool_dl = {
        "night": night_dl,
        "morning": morning_dl,
        "evening": evening_dl,
        "midday_base": base_dl,
        active_pool: active_dl,
    }

    day = np.zeros(MINUTES_PER_DAY, dtype=np.int64)
    for pool, total in pool_dl.items():
        entries = [e for e in profile.schedule if e.pool == pool]
        if not entries:
            continue
        amounts = split_dl(total, [e.weight for e in entries])
        for entry, dl in zip(entries, amounts):
            if entry.kind == "dribble":
                _render_dribble(day, entry, dl)
            elif entry.kind == "draw":
                _render_draw(day, entry, dl, rng)
            elif entry.kind == "pulses":
                _render_pulses(day, entry, dl)
            else:
                raise ValueError(f"unknown schedule entry kind {entry.kind!r}")
    return day


def simulate(
    profile: HouseholdProfile, days: int, start: date = date(2024, 1, 1)
) -> Trace:
    """Render `days` consecutive days into one labeled trace."""
    volumes: list = []
    for d in range(days):
        rng = np.random.default_rng([profile.seed, d])
        budget = draw_daily_budget(profile, rng)
        volumes.extend(int(v) for v in render_day(profile, budget, d, rng))
    n = len(volumes)
    return Trace(
        start=datetime(start.year, start.month, start.day, tzinfo=timezone.utc),
        volumes_dl=volumes,
        leak=[False] * n,
        fire=[False] * n,
        air_pocket=[False] * n,
        window_truth=dict(profile.window_truth),
        meta={
            "generator": "numpy-pcg64",
            "seed": profile.seed,
            "family_size": profile.family_size,
            "days": days,
            "start": start.isoformat(),
        },
    )


def idle_trace(
    minutes: int, start: datetime = datetime(2024, 1, 1, tzinfo=timezone.utc)
) -> Trace:
    """A consumption-free trace, e.g. an unoccupied night."""
    return Trace(
        start=start,
        volumes_dl=[0] * minutes,
        leak=[False] * minutes,
        fire=[False] * minutes,
        air_pocket=[False] * minutes,
        meta={"generator": "idle", "minutes": minutes},
    )


def _span_minutes(trace: Trace, start: datetime, end: datetime | None) -> range:
    first = trace.minute_index(start)
    last = trace.minute_index(end) if end is not None else len(trace)
    if not 0 <= first < len(trace) or last > len(trace) or first >= last:
        raise SpanMismatch(
            f"span [{start}, {end}) outside trace of {len(trace)} minutes"
        )
    return range(first, last)


def inject_leak(trace: Trace, leak: LeakSpec) -> Trace:
    """Add a constant leak to every in-span minute (modifies in place)."""
    dl = leak.rate_dl_per_min
    span = _span_minutes(trace, leak.start, leak.end)
    if dl == 0:
        return trace
    for m in span:
        trace.volumes_dl[m] += dl
        trace.leak[m] = True
    return trace


def inject_fire_surge(
    trace: Trace, start: datetime, end: datetime, rate_lps: float
) -> Trace:
    """Sprinkler-style surge: large constant flow, labeled as fire."""
    dl = round(rate_lps * 600)
    for m in _span_minutes(trace, start, end):
        trace.volumes_dl[m] += dl
        trace.fire[m] = True
    return trace


def inject_air_pockets(trace: Trace, count: int, seed: int = 0) -> Trace:
    """Scatter isolated one-minute 0.1-0.3 L blips over idle minutes."""
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        return trace
    rng = np.random.default_rng([seed, 971])
    idle = [
        m for m in range(1, len(trace) - 1)
        if trace.volumes_dl[m - 1] == 0
        and trace.volumes_dl[m] == 0
        and trace.volumes_dl[m + 1] == 0
    ]
    chosen: list = []
    for m in rng.permutation(idle):
        if all(abs(int(m) - c) > 1 for c in chosen):
            chosen.append(int(m))
        if len(chosen) == count:
            break
    for m in sorted(chosen):
        trace.volumes_dl[m] += int(rng.integers(1, 4))
        trace.air_pocket[m] = True
    return trace


def emit_meter_csv(trace: Trace, initial_reading: float = 0.0) -> bytes:
    """Cumulative meter CSV in the exact ingestion wire format."""
    lines = ["timestamp,reading_liters"]
    reading_dl = round(initial_reading * 10)
    if len(trace):
        lines.append(f"{format_timestamp(trace.start)},{reading_dl // 10}.{reading_dl % 10}")
        for i, dl in enumerate(trace.volumes_dl):
            reading_dl += dl
            ts = trace.start + timedelta(minutes=i + 1)
            lines.append(f"{format_timestamp(ts)},{reading_dl // 10}.{reading_dl % 10}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def emit_labels(trace: Trace) -> bytes:
    """Per-interval ground-truth sidecar, one JSON object per line."""
    lines = []
    for i in range(len(trace)):
        obj = {
            "t": format_timestamp(trace.start + timedelta(minutes=i)),
            "leak": trace.leak[i],
            "fire": trace.fire[i],
            "air_pocket": trace.air_pocket[i],
        }
        lines.append(json.dumps(obj, sort_keys=True, separators=(",", ":")))
    return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")


def emit_meta(trace: Trace) -> bytes:
    """Trace metadata and per-window pattern ground truth as JSON."""
    payload = {"meta": trace.meta, "window_truth": trace.window_truth}
    return (json.dumps(payload, sort_keys=True, indent=2) + "\n").encode("utf-8")
