"""Streaming detection engine.

Single-writer state machine over an ordered 1-minute flow stream. It
learns window statistics and pattern labels on a rolling day history,
runs the zero-flow, two-horizon deviation, and steady-consumption
criteria each minute, and owns the alert lifecycle including human
verdicts and per-window threshold tuning.

All time comes from the stream itself (virtual clock), so replay at any
speed reproduces the exact alert sequence.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone

from .detectors import (
    AlertEvent,
    AlertRecord,
    AlertState,
    Criterion,
    DetectorConfig,
    check_deviation,
    in_band_fraction,
)
from .errors import NoOpenAlert, VerdictAlreadyRecorded, WindowNotInStp
from .metering import (
    CLASSIFIER_INTERVAL_MIN,
    MINUTES_PER_DAY,
    DayWindow,
    FlowSample,
    MissingInterval,
    format_timestamp,
    parse_timestamp,
    tile_day,
)
from .patterns import (
    LEARNING_PERIOD_DAYS,
    LearningState,
    PatternClass,
    pattern_schedule,
)
from .stats import WindowStats, batch_stats, critical_value
from .thresholds import (
    CoefficientTable,
    DEFAULT_STP,
    PSEUDO_ZERO_K_LIMIT_L,
    ReliabilityState,
    StpVector,
    Verdict,
    c_coefficient,
    compute_md,
    default_coefficients,
    tune_md,
    update_reliability,
)

SNAPSHOT_VERSION = 1


@dataclass
class EngineConfig:
    """Full engine configuration: detector knobs plus the learned-model
    parameters (STP lengths, significance level, coefficients)."""

    detector: DetectorConfig = field(default_factory=DetectorConfig)
    stp: StpVector = DEFAULT_STP
    alpha: float = 0.05
    coefficients: CoefficientTable | None = None
    classifier_it: int = CLASSIFIER_INTERVAL_MIN
    learning_days: int = LEARNING_PERIOD_DAYS

    def __post_init__(self):
        if self.coefficients is None:
            self.coefficients = default_coefficients()

    @classmethod
    def with_successor_pairs(cls, **kwargs) -> "EngineConfig":
        """Default config with every STP length paired to its successor."""
        stp = kwargs.pop("stp", DEFAULT_STP)
        detector = kwargs.pop("detector", None)
        if detector is None:
            detector = DetectorConfig(horizon_pairs=stp.successor_pairs())
        return cls(detector=detector, stp=stp, **kwargs)

    def fingerprint(self) -> str:
        payload = {
            "stp": list(self.stp),
            "alpha": self.alpha,
            "classifier_it": self.classifier_it,
            "learning_days": self.learning_days,
            "pseudo_zero": self.detector.pseudo_zero,
            "zero_window": self.detector.zero_window,
            "sd": self.detector.sd,
            "steady_window": self.detector.steady_window,
            "steady_min_flow": self.detector.steady_min_flow,
            "horizon_pairs": [list(p) for p in self.detector.horizon_pairs],
            "a": {f"{p.value}:{i}": v for (p, i), v in sorted(
                self.coefficients.a.items(), key=lambda kv: (kv[0][0].value, kv[0][1])
            )},
            "b": {f"{p.value}:{i}": v for (p, i), v in sorted(
                self.coefficients.b.items(), key=lambda kv: (kv[0][0].value, kv[0][1])
            )},
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _window_key(window: DayWindow) -> str:
    return f"{window.start_offset}:{window.length}"


def _window_from_key(key: str) -> DayWindow:
    start, length = key.split(":")
    return DayWindow(int(start), int(length))


class DetectionEngine:
    """Consumes 1-minute flow samples and emits alert transitions."""

    def __init__(self, config: EngineConfig):
        self.config = config
        det = config.detector
        self.pairs = [tuple(p) for p in det.horizon_pairs]
        self.lengths = sorted({t for pair in self.pairs for t in pair})

        self.learning = LearningState()
        self.history: dict[date, list] = {}
        self.window_stats: dict[DayWindow, WindowStats] = {}
        self.schedule: dict[DayWindow, PatternClass] = {}
        self.tmd: dict[DayWindow, float] = {}
        self.reliability = ReliabilityState()

        self.alerts: dict[int, AlertRecord] = {}
        self.next_alert_id = 1
        self.open_pair: dict[tuple, int] = {}
        self.steady_open: int | None = None
        self.steady_armed = True

        self.current_day: date | None = None
        self.pointer = 0
        self.day_buffer: list = [None] * MINUTES_PER_DAY
        self.zero_tail: list = []
        self.steady_len = 0
        self.steady_tail: list = []
        # per detection length: [tile_index_into_tile_day, partial_sum, tainted]
        self.tile_acc: dict[int, list] = {}
        self.tilings = {length: tile_day(length) for length in self.lengths}
        self.suppressed = bool(det.fire_alarm_suppressed)

    # ------------------------------------------------------------------
    # stream consumption

    def push_many(self, items) -> list:
        events = []
        for item in items:
            events.extend(self.push(item))
        return events

    def push(self, item) -> list:
        """Advance the engine by one base interval; returns transitions."""
        if item.interval_length != 1:
            raise ValueError("engine consumes 1-minute intervals")
        ts = item.interval_start
        if self.current_day is None:
            self._start_day(ts.date())
            self.pointer = ts.hour * 60 + ts.minute
            self._align_tiles()
        else:
            expected = self._expected_ts()
            if ts != expected:
                raise ValueError(
                    f"non-contiguous stream: expected {expected}, got {ts}"
                )

        volume = item.volume if isinstance(item, FlowSample) else None
        if self.suppressed:
            volume = None  # suppressed minutes never feed learning or criteria
        minute = self.pointer
        self.day_buffer[minute] = volume
        self.pointer += 1
        now = self._minute_end_ts(minute)

        events: list = []
        self._track_zero(volume, events, now)
        self._track_steady(volume, events, now)
        self._track_tiles(volume, minute, events, now)

        if self.pointer == MINUTES_PER_DAY:
            self._complete_day()
        return events

    def _start_day(self, day: date) -> None:
        self.current_day = day
        self.day_buffer = [None] * MINUTES_PER_DAY
        self.pointer = 0
        if self.learning.start_date is None:
            self.learning.start_date = day
        for length in self.lengths:
            self.tile_acc[length] = [0, 0.0, False]

    def _align_tiles(self) -> None:
        """Point each tile accumulator at the tile containing the stream's
        first minute; a tile entered mid-way is tainted for the day."""
        for length in self.lengths:
            for idx, window in enumerate(self.tilings[length]):
                if window.start_offset <= self.pointer < window.end_offset:
                    self.tile_acc[length] = [idx, 0.0, self.pointer != window.start_offset]
                    break

    def _expected_ts(self) -> datetime:
        base = datetime(
            self.current_day.year, self.current_day.month, self.current_day.day,
            tzinfo=timezone.utc,
        )
        return base + timedelta(minutes=self.pointer)

    def _minute_end_ts(self, minute: int) -> datetime:
        base = datetime(
            self.current_day.year, self.current_day.month, self.current_day.day,
            tzinfo=timezone.utc,
        )
        return base + timedelta(minutes=minute + 1)

    def _day_ts(self, offset_minutes: int) -> datetime:
        base = datetime(
            self.current_day.year, self.current_day.month, self.current_day.day,
            tzinfo=timezone.utc,
        )
        return base + timedelta(minutes=offset_minutes)

    def _complete_day(self) -> None:
        self.history[self.current_day] = self.day_buffer
        self.learning.elapsed_days += 1
        keep = sorted(self.history)[-(self.config.learning_days + 1):]
        self.history = {d: self.history[d] for d in keep}
        self._nightly_update()
        self._start_day(self.current_day + timedelta(days=1))

    # ------------------------------------------------------------------
    # learning

    def _nightly_update(self) -> None:
        days = sorted(self.history)[-self.config.learning_days:]
        hist = {d: self.history[d] for d in days}
        stats: dict[DayWindow, WindowStats] = {}
        for length in self.lengths:
            for window in self.tilings[length]:
                obs = []
                for d in days:
                    mins = hist[d][window.start_offset:window.end_offset]
                    if any(x is None for x in mins):
                        continue
                    obs.append(sum(mins))
                stats[window] = batch_stats(obs, window=window, alpha=self.config.alpha)
        self.window_stats = stats
        if not self.learning.in_learning and len(hist) >= self.config.learning_days:
            self.schedule = pattern_schedule(
                hist, self.config.stp, it=self.config.classifier_it
            )

    @property
    def average_criterion_active(self) -> bool:
        return not self.learning.in_learning and bool(self.schedule)

    # ------------------------------------------------------------------
    # thresholds

    def raw_md(self, window: DayWindow) -> float:
        """Untuned ceiling for a window.

        Day tilings of lengths that do not divide 1440 end in a shorter
        remainder tile; it has its own statistics and label and borrows
        the coefficient slot of its parent STP length. (Composing the
        ceiling from sub-tiles would average thresholds while the
        consumption sums, systematically under-thresholding the span.)
        """
        stats = self.window_stats.get(
            window, WindowStats(window=window, alpha=self.config.alpha)
        )
        pattern = self.schedule.get(window, PatternClass.MUTABLE)
        if window.length in self.config.stp:
            return compute_md(
                window, pattern, stats, self.config.coefficients, self.config.stp
            )
        parent = self._remainder_parent(window)
        if parent is not None:
            idx = self.config.stp.index_of(parent)
            k = critical_value(stats) if stats.n >= 2 else None
            if k is None or k <= PSEUDO_ZERO_K_LIMIT_L:
                return c_coefficient(idx, self.config.stp)
            a_val, b_val = self.config.coefficients.lookup(pattern, idx)
            return a_val * k + b_val * stats.std
        raise WindowNotInStp(
            f"window {window.label()} is neither an STP tile nor a remainder tile"
        )

    def _remainder_parent(self, window: DayWindow) -> int | None:
        """The STP length whose day tiling ends in this remainder window."""
        for length in self.config.stp:
            rem = MINUTES_PER_DAY % length
            if (
                rem
                and window.length == rem
                and window.start_offset == MINUTES_PER_DAY - rem
            ):
                return length
        return None

    def threshold_for(self, window: DayWindow) -> float:
        """Effective ceiling: the human-tuned value when one exists."""
        if window in self.tmd:
            return self.tmd[window]
        return self.raw_md(window)

    # ------------------------------------------------------------------
    # per-minute criteria

    def _track_zero(self, volume, events: list, now: datetime) -> None:
        zw = self.config.detector.zero_window
        self.zero_tail.append(volume)
        if len(self.zero_tail) > zw:
            self.zero_tail.pop(0)
        if self.suppressed or len(self.zero_tail) < zw:
            return
        if any(v is None for v in self.zero_tail):
            return
        if sum(self.zero_tail) <= self.config.detector.pseudo_zero:
            for pair, aid in list(self.open_pair.items()):
                rec = self.alerts[aid]
                if rec.state is AlertState.POTENTIAL:
                    rec.transition(AlertState.CLEARED_BY_ZERO_FLOW)
                    del self.open_pair[pair]
                    events.append(self._event(rec, now))

    def _track_steady(self, volume, events: list, now: datetime) -> None:
        det = self.config.detector
        if volume is None or volume < det.steady_min_flow:
            self.steady_len = 0
            self.steady_tail = []
            self.steady_armed = True
            return
        self.steady_len += 1
        self.steady_tail.append(volume)
        if len(self.steady_tail) > det.steady_window:
            self.steady_tail.pop(0)
        if self.steady_len < det.steady_window or self.suppressed:
            return
        if not self.steady_armed or self.steady_open is not None:
            return
        fraction = in_band_fraction(self.steady_tail, det.sd)
        if fraction > 0.5:
            rec = AlertRecord(
                id=self.next_alert_id,
                criterion=Criterion.STEADY_CONSUMPTION,
                state=AlertState.CONFIRMED,
                span_start=now - timedelta(minutes=det.steady_window),
                span_end=now,
                measured=fraction,
                threshold=0.5,
                raised_at=now,
            )
            self.next_alert_id += 1
            self.alerts[rec.id] = rec
            self.steady_open = rec.id
            self.steady_armed = False
            events.append(self._event(rec, now))

    def _track_tiles(self, volume, minute: int, events: list, now: datetime) -> None:
        closings = []
        for length in self.lengths:
            idx, total, tainted = self.tile_acc[length]
            window = self.tilings[length][idx]
            if volume is None:
                tainted = True
            else:
                total += volume
            if minute + 1 == window.end_offset:
                closings.append((length, window, total, tainted))
                nxt = (idx + 1) % len(self.tilings[length])
                self.tile_acc[length] = [nxt, 0.0, False]
            else:
                self.tile_acc[length] = [idx, total, tainted]

        if not closings or not self.average_criterion_active:
            return
        # raises first, then adjudications, so a potential raised at a
        # shared boundary is judged by the longer window closing with it
        for length, window, total, tainted in closings:
            if tainted or self.suppressed:
                continue
            for pair in self.pairs:
                if pair[0] != length or pair in self.open_pair:
                    continue
                threshold = self.threshold_for(window)
                if check_deviation(total, threshold):
                    rec = AlertRecord(
                        id=self.next_alert_id,
                        criterion=Criterion.AVERAGE_DEVIATION,
                        state=AlertState.POTENTIAL,
                        span_start=self._day_ts(window.start_offset),
                        span_end=self._day_ts(window.end_offset),
                        measured=total,
                        threshold=threshold,
                        raised_at=now,
                        horizon=pair,
                        window=window,
                    )
                    self.next_alert_id += 1
                    self.alerts[rec.id] = rec
                    self.open_pair[pair] = rec.id
                    events.append(self._event(rec, now))
        for length, window, total, tainted in closings:
            if tainted or self.suppressed:
                continue
            for pair in self.pairs:
                if pair[1] != length:
                    continue
                aid = self.open_pair.get(pair)
                if aid is None:
                    continue
                rec = self.alerts[aid]
                if rec.state is not AlertState.POTENTIAL:
                    continue
                threshold = self.threshold_for(window)
                if check_deviation(total, threshold):
                    rec.transition(AlertState.CONFIRMED)
                    rec.confirm_span = (
                        self._day_ts(window.start_offset),
                        self._day_ts(window.end_offset),
                    )
                    rec.confirm_measured = total
                    rec.confirm_threshold = threshold
                    events.append(
                        AlertEvent(
                            id=rec.id,
                            criterion=rec.criterion,
                            state=rec.state,
                            span_start=self._day_ts(window.start_offset),
                            span_end=self._day_ts(window.end_offset),
                            measured=total,
                            threshold=threshold,
                            timestamp=now,
                        )
                    )
                else:
                    rec.transition(AlertState.EXPIRED)
                    del self.open_pair[pair]
                    events.append(self._event(rec, now))

    def _event(self, rec: AlertRecord, now: datetime) -> AlertEvent:
        return AlertEvent(
            id=rec.id,
            criterion=rec.criterion,
            state=rec.state,
            span_start=rec.span_start,
            span_end=rec.span_end,
            measured=rec.measured,
            threshold=rec.threshold,
            timestamp=now,
        )

    # ------------------------------------------------------------------
    # commands (single-writer side channel)

    def set_fire_alarm(self, active: bool) -> None:
        self.suppressed = bool(active)

    def apply_verdict(self, alert_id: int, verdict: Verdict):
        """Judge a confirmed alert; returns (reliability, tuned threshold).

        Tuning replaces the ceiling of the window that raised the alert;
        steady alerts carry no window and only move the counters.
        """
        rec = self.alerts.get(alert_id)
        if rec is None:
            raise NoOpenAlert(f"no alert with id {alert_id}")
        if rec.state in (AlertState.JUDGED_FALSE, AlertState.JUDGED_REAL):
            raise VerdictAlreadyRecorded(f"alert {alert_id} already judged")
        if rec.state is not AlertState.CONFIRMED:
            raise NoOpenAlert(f"alert {alert_id} is {rec.state.value}, not Confirmed")

        rec.transition(
            AlertState.JUDGED_REAL if verdict is Verdict.REAL_LEAK
            else AlertState.JUDGED_FALSE
        )
        self.reliability = update_reliability(self.reliability, verdict)

        if rec.criterion is Criterion.AVERAGE_DEVIATION and rec.horizon:
            self.open_pair.pop(tuple(rec.horizon), None)
        if self.steady_open == alert_id:
            self.steady_open = None

        tuned = None
        if rec.criterion is Criterion.AVERAGE_DEVIATION and rec.window is not None:
            tuned = tune_md(self.raw_md(rec.window), self.reliability, self.learning)
            self.tmd[rec.window] = tuned
        return self.reliability, tuned

    # ------------------------------------------------------------------
    # persistence

    def snapshot(self) -> dict:
        def win_stats(ws: WindowStats) -> dict:
            # std is the published field; m2 restores the estimator exactly
            return {"n": ws.n, "mean": ws.mean, "std": ws.std, "m2": ws.m2}

        def alert_dict(rec: AlertRecord) -> dict:
            d = {
                "id": rec.id,
                "criterion": rec.criterion.value,
                "state": rec.state.value,
                "span": [format_timestamp(rec.span_start), format_timestamp(rec.span_end)],
                "measured": rec.measured,
                "threshold": rec.threshold,
                "raised_at": format_timestamp(rec.raised_at),
                "horizon": list(rec.horizon) if rec.horizon else None,
                "window": _window_key(rec.window) if rec.window else None,
            }
            if rec.confirm_span:
                d["confirm_span"] = [
                    format_timestamp(rec.confirm_span[0]),
                    format_timestamp(rec.confirm_span[1]),
                ]
                d["confirm_measured"] = rec.confirm_measured
                d["confirm_threshold"] = rec.confirm_threshold
            return d

        return {
            "schema": SNAPSHOT_VERSION,
            "config_fingerprint": self.config.fingerprint(),
            "learning": {
                "start_date": self.learning.start_date.isoformat()
                if self.learning.start_date else None,
                "elapsed_days": self.learning.elapsed_days,
            },
            "history": {d.isoformat(): mins for d, mins in sorted(self.history.items())},
            "current_day": self.current_day.isoformat() if self.current_day else None,
            "pointer": self.pointer,
            "day_buffer": self.day_buffer,
            "window_stats": {
                _window_key(w): win_stats(s) for w, s in sorted(self.window_stats.items())
            },
            "schedule": {
                _window_key(w): p.value for w, p in sorted(self.schedule.items())
            },
            "tmd": {_window_key(w): v for w, v in sorted(self.tmd.items())},
            "reliability": {
                "an": self.reliability.an,
                "fn": self.reliability.fn,
                "ln": self.reliability.ln,
            },
            "alerts": [alert_dict(self.alerts[i]) for i in sorted(self.alerts)],
            "open_pair": {f"{p[0]},{p[1]}": aid for p, aid in sorted(self.open_pair.items())},
            "steady_open": self.steady_open,
            "steady_armed": self.steady_armed,
            "next_alert_id": self.next_alert_id,
            "zero_tail": self.zero_tail,
            "steady_len": self.steady_len,
            "steady_tail": self.steady_tail,
            "tile_acc": {str(k): v for k, v in sorted(self.tile_acc.items())},
            "suppressed": self.suppressed,
        }

    @classmethod
    def restore(cls, data: dict, config: EngineConfig) -> "DetectionEngine":
        eng = cls(config)
        learn = data["learning"]
        eng.learning = LearningState(
            start_date=date.fromisoformat(learn["start_date"])
            if learn["start_date"] else None,
            elapsed_days=learn["elapsed_days"],
        )
        eng.history = {
            date.fromisoformat(d): list(mins) for d, mins in data["history"].items()
        }
        eng.current_day = (
            date.fromisoformat(data["current_day"]) if data["current_day"] else None
        )
        eng.pointer = data["pointer"]
        eng.day_buffer = list(data["day_buffer"])
        eng.window_stats = {}
        for key, ws in data["window_stats"].items():
            window = _window_from_key(key)
            eng.window_stats[window] = WindowStats(
                window=window, n=ws["n"], mean=ws["mean"], m2=ws["m2"],
                alpha=config.alpha,
            )
        eng.schedule = {
            _window_from_key(k): PatternClass(v) for k, v in data["schedule"].items()
        }
        eng.tmd = {_window_from_key(k): v for k, v in data["tmd"].items()}
        rel = data["reliability"]
        eng.reliability = ReliabilityState(an=rel["an"], fn=rel["fn"], ln=rel["ln"])
        eng.alerts = {}
        for a in data["alerts"]:
            rec = AlertRecord(
                id=a["id"],
                criterion=Criterion(a["criterion"]),
                state=AlertState(a["state"]),
                span_start=parse_timestamp(a["span"][0]),
                span_end=parse_timestamp(a["span"][1]),
                measured=a["measured"],
                threshold=a["threshold"],
                raised_at=parse_timestamp(a["raised_at"]),
                horizon=tuple(a["horizon"]) if a.get("horizon") else None,
            )
            if a.get("window"):
                rec.window = _window_from_key(a["window"])
            if a.get("confirm_span"):
                rec.confirm_span = (
                    parse_timestamp(a["confirm_span"][0]),
                    parse_timestamp(a["confirm_span"][1]),
                )
                rec.confirm_measured = a["confirm_measured"]
                rec.confirm_threshold = a["confirm_threshold"]
            eng.alerts[rec.id] = rec
        eng.open_pair = {
            tuple(int(x) for x in k.split(",")): v
            for k, v in data["open_pair"].items()
        }
        eng.steady_open = data["steady_open"]
        eng.steady_armed = data["steady_armed"]
        eng.next_alert_id = data["next_alert_id"]
        eng.zero_tail = list(data["zero_tail"])
        eng.steady_len = data["steady_len"]
        eng.steady_tail = list(data["steady_tail"])
        eng.tile_acc = {int(k): list(v) for k, v in data["tile_acc"].items()}
        eng.suppressed = data["suppressed"]
        return eng

    @property
    def last_processed(self) -> datetime | None:
        if self.current_day is None:
            return None
        return self._day_ts(self.pointer)
