"""Meter-stream ingestion and windowing.

Converts cumulative analogue-register readings into per-interval flow
volumes, slices flows into clock-anchored day windows, and enforces the
sanity rules the rest of the engine relies on (monotone readings, strictly
increasing timestamps, explicit gap markers instead of invented zeros).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone

from .errors import (
    CoverageGap,
    DuplicateTimestamp,
    IncompleteGroup,
    InsufficientData,
    MalformedRow,
    NonMonotoneReading,
    OutOfOrderTimestamp,
)

CSV_HEADER = "timestamp,reading_liters"

#: Analogue register granularity: readings are snapped to this grid on ingest.
READING_RESOLUTION_L = 0.1

#: Default sampling interval for detection streams (minutes).
DETECTION_INTERVAL_MIN = 1
#: Default sampling interval for classifier sample groups (minutes).
CLASSIFIER_INTERVAL_MIN = 5

MINUTES_PER_DAY = 1440


def quantize_reading(liters: float) -> float:
    """Snap a cumulative reading to the 0.1 L register grid."""
    return round(liters / READING_RESOLUTION_L) * READING_RESOLUTION_L


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 UTC timestamp ('Z' suffix accepted on py3.10)."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    ts = datetime.fromisoformat(raw)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    """Render a UTC timestamp in the CSV wire format (trailing 'Z')."""
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class MeterSample:
    """One cumulative register reading: (instant, liters since install)."""

    timestamp: datetime
    reading: float

    def __post_init__(self):
        if self.reading < 0:
            raise ValueError(f"negative meter reading: {self.reading}")


@dataclass(frozen=True)
class FlowSample:
    """Volume consumed over one sampling interval."""

    interval_start: datetime
    interval_length: int  # minutes
    volume: float  # liters, >= 0

    def __post_init__(self):
        if self.volume < -1e-9:
            raise ValueError(f"negative flow volume: {self.volume}")

    @property
    def interval_end(self) -> datetime:
        return self.interval_start + timedelta(minutes=self.interval_length)


@dataclass(frozen=True)
class MissingInterval:
    """Marker for a grid interval whose consumption is unknown.

    Detectors must treat any window containing one of these as unavailable
    for the day; inventing a zero here would fake a no-consumption slot.
    """

    interval_start: datetime
    interval_length: int  # minutes


@dataclass(frozen=True, order=True)
class DayWindow:
    """A clock-anchored short time period: the same interval every day."""

    start_offset: int  # minutes past midnight, [0, 1440)
    length: int  # minutes, > 0

    def __post_init__(self):
        if not 0 <= self.start_offset < MINUTES_PER_DAY:
            raise ValueError(f"start_offset out of range: {self.start_offset}")
        if self.length <= 0:
            raise ValueError(f"non-positive window length: {self.length}")

    @property
    def end_offset(self) -> int:
        return self.start_offset + self.length

    def label(self) -> str:
        """Human-readable clock span, e.g. '06:00-06:30'."""
        s, e = self.start_offset, self.end_offset
        return f"{s // 60:02d}:{s % 60:02d}-{(e // 60) % 24:02d}:{e % 60:02d}"


@dataclass
class SampleGroup:
    """Flow samples for one (window, day) at spacing `it` minutes.

    Membership follows the sampled-consumption rule: offsets it*i for
    every natural i with it*i <= window.length, so a complete group holds
    length/it + 1 samples including both boundary offsets.
    """

    window: DayWindow
    day: date
    it: int
    samples: list = field(default_factory=list)  # FlowSample | MissingInterval

    def is_complete(self) -> bool:
        return all(isinstance(s, FlowSample) for s in self.samples)

    def total(self) -> float:
        """Total volume over the group; requires a complete group."""
        if not self.is_complete():
            raise IncompleteGroup(
                f"group {self.window.label()} on {self.day} has missing intervals"
            )
        return sum(s.volume for s in self.samples)


def tile_day(length: int) -> list[DayWindow]:
    """Non-overlapping windows of `length` minutes covering the whole day.

    When `length` does not divide 1440 the final window is the shorter
    remainder, so coverage stays total and non-overlapping.
    """
    windows = []
    start = 0
    while start < MINUTES_PER_DAY:
        span = min(length, MINUTES_PER_DAY - start)
        windows.append(DayWindow(start, span))
        start += span
    return windows


def ingest_csv(stream) -> list[MeterSample]:
    """Parse a meter-log CSV into ordered, validated samples.

    Accepts bytes, str, or a file-like object. Readings are quantized to
    the 0.1 L register grid. Out-of-order rows are a hard error: analogue
    loggers write sequentially, so disorder signals corruption.
    """
    if isinstance(stream, bytes):
        text = stream.decode("utf-8")
    elif isinstance(stream, str):
        text = stream
    else:
        data = stream.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MalformedRow(1, "empty stream, expected header")
    if lines[0].strip() != CSV_HEADER:
        raise MalformedRow(1, f"expected header {CSV_HEADER!r}, got {lines[0]!r}")

    samples: list[MeterSample] = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            raise MalformedRow(line_no, "blank row")
        parts = line.split(",")
        if len(parts) != 2:
            raise MalformedRow(line_no, f"expected 2 fields, got {len(parts)}")
        try:
            ts = parse_timestamp(parts[0])
        except ValueError as exc:
            raise MalformedRow(line_no, f"bad timestamp: {exc}") from exc
        try:
            reading = float(parts[1])
        except ValueError as exc:
            raise MalformedRow(line_no, f"bad reading: {parts[1]!r}") from exc
        if reading < 0:
            raise MalformedRow(line_no, f"negative reading: {reading}")
        reading = quantize_reading(reading)

        if samples:
            prev = samples[-1]
            if ts == prev.timestamp:
                raise DuplicateTimestamp(f"line {line_no}: duplicate {parts[0]}")
            if ts < prev.timestamp:
                raise OutOfOrderTimestamp(
                    f"line {line_no}: {parts[0]} precedes previous row"
                )
            if reading < prev.reading - 1e-9:
                raise NonMonotoneReading(
                    f"line {line_no}: reading {reading} after {prev.reading} "
                    "(meter rollback)"
                )
        samples.append(MeterSample(ts, reading))
    return samples


def to_flow(samples: list[MeterSample], interval: int = DETECTION_INTERVAL_MIN):
    """Convert cumulative readings to per-interval volumes on a fixed grid.

    The grid is anchored at the first sample. An interval is concrete only
    when a reading exists at its closing boundary; consumption accumulated
    across a gap is booked to the interval that closes the gap, and the
    skipped intervals become MissingInterval markers.

    Returns a list of FlowSample | MissingInterval in grid order.
    """
    if interval <= 0:
        raise ValueError(f"non-positive interval: {interval}")
    if len(samples) < 2:
        raise InsufficientData("need at least two samples")
    span = samples[-1].timestamp - samples[0].timestamp
    step = timedelta(minutes=interval)
    if span < step:
        raise InsufficientData(
            f"span {span} shorter than one {interval}-minute interval"
        )

    by_time = {s.timestamp: s.reading for s in samples}
    anchor = samples[0].timestamp
    n_intervals = int(span // step)

    out: list = []
    last_read_boundary = anchor
    for k in range(n_intervals):
        start = anchor + k * step
        end = start + step
        if end in by_time:
            volume = by_time[end] - by_time[last_read_boundary]
            out.append(FlowSample(start, interval, max(volume, 0.0)))
            last_read_boundary = end
        else:
            out.append(MissingInterval(start, interval))
    return out


def slice_window(
    flows: list, window: DayWindow, day: date, it: int
) -> SampleGroup:
    """Extract the sample group for (window, day) at spacing `it` minutes.

    `flows` may be at any base interval that tiles each it-minute slot
    exactly (the usual case: 1-minute detection flows re-aggregated to
    5-minute classifier samples). Raises CoverageGap when any required
    slot cannot be tiled by concrete flows.
    """
    if window.length % it != 0:
        raise ValueError(f"interval {it} does not divide window length {window.length}")

    day_start = datetime(day.year, day.month, day.day, tzinfo=timezone.utc)
    concrete = {
        f.interval_start: f for f in flows if isinstance(f, FlowSample)
    }

    group = SampleGroup(window=window, day=day, it=it)
    for i in range(window.length // it + 1):
        slot_start = day_start + timedelta(minutes=window.start_offset + it * i)
        slot_end = slot_start + timedelta(minutes=it)
        volume = 0.0
        cursor = slot_start
        ok = True
        while cursor < slot_end:
            f = concrete.get(cursor)
            if f is None or f.interval_end > slot_end:
                ok = False
                break
            volume += f.volume
            cursor = f.interval_end
        if not ok:
            raise CoverageGap(
                f"no coverage for {window.label()} slot at offset {it * i} on {day}"
            )
        group.samples.append(FlowSample(slot_start, it, volume))
    return group


def flows_to_csv(
    flows: list, initial_reading: float = 0.0, start: datetime | None = None
) -> bytes:
    """Render flow volumes back into the cumulative CSV wire format."""
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    if flows:
        first = flows[0]
        ts = start if start is not None else first.interval_start
        reading = quantize_reading(initial_reading)
        buf.write(f"{format_timestamp(ts)},{reading:.1f}\n")
        for f in flows:
            if isinstance(f, MissingInterval):
                continue
            reading = quantize_reading(reading + f.volume)
            buf.write(f"{format_timestamp(f.interval_end)},{reading:.1f}\n")
    elif start is not None:
        buf.write(f"{format_timestamp(start)},{quantize_reading(initial_reading):.1f}\n")
    return buf.getvalue().encode("utf-8")
