"""Per-window consumption vs. threshold tables.

Produces the evidence tables behind the detection run: for one day and
one window length, each row holds the window's consumption, its raw
ceiling (MD), the effective ceiling (TMD when tuned), and the state of
any deviation alert that originated or confirmed there.
"""

from __future__ import annotations

import io
from datetime import date, datetime, timedelta, timezone

from .engine import DetectionEngine
from .metering import MINUTES_PER_DAY, tile_day

REPORT_HEADER = "window_start,consumption,MD,TMD,alert_state"


def _day_base(day: date) -> datetime:
    return datetime(day.year, day.month, day.day, tzinfo=timezone.utc)


def alert_state_for(engine: DetectionEngine, day: date, window) -> str | None:
    """Last lifecycle state of a deviation alert tied to this window
    instance, via its origin span or its confirming span."""
    base = _day_base(day)
    w_start = base + timedelta(minutes=window.start_offset)
    w_end = base + timedelta(minutes=window.end_offset)
    state = None
    for rec in sorted(engine.alerts.values(), key=lambda a: a.id):
        if rec.criterion.value != "AverageDeviation":
            continue
        if rec.span_start == w_start and rec.span_end == w_end:
            state = rec.state.value
        elif rec.confirm_span and rec.confirm_span == (w_start, w_end):
            state = rec.state.value
    return state


def window_rows(
    engine: DetectionEngine, minutes, day: date, length: int
) -> list:
    """Rows for every tiling window of `length` over one day's minutes."""
    rows = []
    for window in tile_day(length):
        segment = minutes[window.start_offset:window.end_offset]
        if len(segment) < window.length or any(m is None for m in segment):
            consumption = None
        else:
            consumption = round(float(sum(segment)), 6)
        md = round(engine.raw_md(window), 6)
        tmd = round(engine.threshold_for(window), 6)
        rows.append(
            {
                "window_start": window.label().split("-")[0],
                "window": window,
                "consumption": consumption,
                "md": md,
                "tmd": tmd,
                "alert_state": alert_state_for(engine, day, window),
            }
        )
    return rows


def rows_to_csv(rows) -> bytes:
    buf = io.StringIO()
    buf.write(REPORT_HEADER + "\n")
    for row in rows:
        consumption = "" if row["consumption"] is None else f"{row['consumption']:.6g}"
        state = row["alert_state"] or ""
        buf.write(
            f"{row['window_start']},{consumption},{row['md']:.6g},"
            f"{row['tmd']:.6g},{state}\n"
        )
    return buf.getvalue().encode("utf-8")


def build_report(flows, config, lengths=None) -> tuple:
    """Run detection with thresholds frozen before the final day, then
    tabulate that day.

    Returns (tables, events): tables maps length -> rows for the last
    full or partial day of the stream; events is the full alert stream
    from replaying the whole trace.
    """
    from .metering import FlowSample

    if not flows:
        raise ValueError("empty flow stream")
    lengths = list(lengths) if lengths is not None else list(config.stp)

    last_day = flows[-1].interval_start.date()
    prior = [f for f in flows if f.interval_start.date() < last_day]
    final = [f for f in flows if f.interval_start.date() == last_day]

    engine = DetectionEngine(config)
    events = engine.push_many(prior)

    # freeze the pre-final-day model, then replay the final day on a copy
    frozen = DetectionEngine.restore(engine.snapshot(), config)
    events.extend(engine.push_many(final))

    minutes: list = [None] * MINUTES_PER_DAY
    for f in final:
        offset = f.interval_start.hour * 60 + f.interval_start.minute
        minutes[offset] = f.volume if isinstance(f, FlowSample) else None

    # alert states come from the full run; thresholds from the frozen model
    frozen.alerts = engine.alerts
    tables = {length: window_rows(frozen, minutes, last_day, length) for length in lengths}
    return tables, events
