"""Long-running monitor process and its HTTP surface.

One Monitor owns the detection engine. The stream consumer is the only
writer; API handlers that mutate (verdicts, fire-alarm) serialize through
the same lock, and reads work off the engine's JSON-able state. State
persists as a single atomic-rename JSON snapshot, restored on restart so
a mid-stream crash never repeats the learning period.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from datetime import datetime, timedelta
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .detectors import AlertState, Criterion
from .engine import DetectionEngine, EngineConfig
from .errors import (
    LeakwatchError,
    NoOpenAlert,
    SnapshotError,
    VerdictAlreadyRecorded,
)
from .metering import FlowSample, MissingInterval, format_timestamp
from .thresholds import Verdict

logger = logging.getLogger(__name__)


def dump_snapshot(snapshot: dict) -> bytes:
    return (json.dumps(snapshot, sort_keys=True, separators=(",", ":")) + "\n").encode(
        "utf-8"
    )


def save_snapshot(path, snapshot: dict) -> None:
    """Write the snapshot atomically (tmp file + rename)."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(dump_snapshot(snapshot))
    os.replace(tmp, path)


def load_snapshot(path) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_bytes())
    except (OSError, ValueError) as exc:
        raise SnapshotError(f"cannot read snapshot {path}: {exc}") from exc
    if not isinstance(data, dict) or "schema" not in data:
        raise SnapshotError(f"snapshot {path} has no schema field")
    return data


class Monitor:
    """Engine owner: one writer, lock-serialized commands, periodic
    snapshot persistence driven by stream time."""

    def __init__(
        self,
        config: EngineConfig,
        snapshot_path=None,
        snapshot_interval_min: int = 10,
        api_token: str | None = None,
    ):
        self.config = config
        self.snapshot_path = Path(snapshot_path) if snapshot_path else None
        self.snapshot_interval = timedelta(minutes=snapshot_interval_min)
        self.api_token = api_token
        self.lock = threading.Lock()
        self.events: list = []
        self._last_persist: datetime | None = None

        if self.snapshot_path and self.snapshot_path.exists():
            data = load_snapshot(self.snapshot_path)
            fingerprint = config.fingerprint()
            if data.get("config_fingerprint") != fingerprint:
                raise SnapshotError(
                    f"snapshot {self.snapshot_path} was written under a different "
                    "configuration; remove it or restore the old config"
                )
            self.engine = DetectionEngine.restore(data, config)
            logger.info("restored state from %s", self.snapshot_path)
        else:
            self.engine = DetectionEngine(config)

    # -- stream side -----------------------------------------------------

    def consume(self, flows) -> list:
        """Feed flows in timestamp order; skips anything already processed
        (restart-safe). Returns the new alert events."""
        new_events = []
        for item in flows:
            with self.lock:
                last = self.engine.last_processed
                if last is not None and item.interval_start < last:
                    continue
                events = self.engine.push(item)
                self.events.extend(events)
                new_events.extend(events)
                self._maybe_persist()
        return new_events

    def _maybe_persist(self) -> None:
        if self.snapshot_path is None:
            return
        now = self.engine.last_processed
        if now is None:
            return
        if self._last_persist is None or now - self._last_persist >= self.snapshot_interval:
            save_snapshot(self.snapshot_path, self.engine.snapshot())
            self._last_persist = now

    def persist(self) -> None:
        if self.snapshot_path is not None:
            with self.lock:
                save_snapshot(self.snapshot_path, self.engine.snapshot())

    # -- command side ----------------------------------------------------

    def verdict(self, alert_id: int, verdict: Verdict):
        with self.lock:
            reliability, tuned = self.engine.apply_verdict(alert_id, verdict)
            if self.snapshot_path is not None:
                save_snapshot(self.snapshot_path, self.engine.snapshot())
        return reliability, tuned

    def fire_alarm(self, active: bool) -> None:
        with self.lock:
            self.engine.set_fire_alarm(active)

    # -- read side ---------------------------------------------------------

    def status(self) -> dict:
        with self.lock:
            eng = self.engine
            last = eng.last_processed
            current_pattern = None
            flow_lpm = None
            if eng.current_day is not None and eng.pointer > 0:
                minute = eng.pointer - 1
                vol = eng.day_buffer[minute]
                flow_lpm = vol if vol is not None else None
                if eng.schedule:
                    smallest = min(eng.config.stp)
                    window = next(
                        w for w in eng.tilings.get(smallest, [])
                        if w.start_offset <= minute < w.end_offset
                    ) if smallest in eng.tilings else None
                    if window is not None:
                        label = eng.schedule.get(window)
                        current_pattern = label.value if label else None
            open_alerts = sum(1 for a in eng.alerts.values() if a.is_open)
            return {
                "in_learning": eng.learning.in_learning,
                "elapsed_days": eng.learning.elapsed_days,
                "learning_days": eng.config.learning_days,
                "start_date": eng.learning.start_date.isoformat()
                if eng.learning.start_date else None,
                "last_processed": format_timestamp(last) if last else None,
                "current_pattern": current_pattern,
                "flow_lpm": flow_lpm,
                "reliability_r": eng.reliability.r,
                "judged_alerts": eng.reliability.an,
                "open_alerts": open_alerts,
                "fire_alarm_suppressed": eng.suppressed,
                "config_fingerprint": eng.config.fingerprint(),
            }

    def alerts(self, state: str | None = None) -> list:
        if state is not None:
            try:
                wanted = AlertState(state)
            except ValueError:
                raise ValueError(f"unknown alert state {state!r}") from None
        with self.lock:
            records = sorted(self.engine.alerts.values(), key=lambda a: (a.raised_at, a.id))
            out = []
            for rec in records:
                if state is not None and rec.state is not wanted:
                    continue
                out.append(self._alert_dict(rec))
            return out

    @staticmethod
    def _alert_dict(rec) -> dict:
        d = {
            "id": rec.id,
            "criterion": rec.criterion.value,
            "state": rec.state.value,
            "span": [format_timestamp(rec.span_start), format_timestamp(rec.span_end)],
            "measured": rec.measured,
            "threshold": rec.threshold,
            "raised_at": format_timestamp(rec.raised_at),
            "horizon": list(rec.horizon) if rec.horizon else None,
        }
        if rec.confirm_span:
            d["confirm_span"] = [
                format_timestamp(rec.confirm_span[0]),
                format_timestamp(rec.confirm_span[1]),
            ]
            d["confirm_measured"] = rec.confirm_measured
            d["confirm_threshold"] = rec.confirm_threshold
        return d

    def report_rows(self, length: int) -> list:
        """Per-window consumption vs. ceiling for the most recent full day
        at one STP length (drives the dashboard chart)."""
        from .report import window_rows

        with self.lock:
            eng = self.engine
            days = sorted(eng.history)
            if not days:
                return []
            day = days[-1]
            return window_rows(eng, eng.history[day], day, length)


def build_app(monitor: Monitor) -> FastAPI:
    app = FastAPI(title="leakwatch", version="0.1.0")

    def check_token(request: Request) -> None:
        if monitor.api_token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {monitor.api_token}":
            raise HTTPException(status_code=401, detail="missing or bad token")

    @app.get("/status")
    def status():
        return monitor.status()

    @app.get("/alerts")
    def alerts(state: str | None = None):
        try:
            return monitor.alerts(state)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.post("/alerts/{alert_id}/verdict")
    def post_verdict(alert_id: int, body: dict, request: Request):
        check_token(request)
        raw = body.get("verdict")
        try:
            verdict = Verdict(raw)
        except ValueError:
            raise HTTPException(status_code=400, detail=f"unknown verdict {raw!r}")
        try:
            reliability, tuned = monitor.verdict(alert_id, verdict)
        except VerdictAlreadyRecorded as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except NoOpenAlert as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {
            "r": reliability.r,
            "an": reliability.an,
            "fn": reliability.fn,
            "ln": reliability.ln,
            "tmd": tuned,
        }

    @app.post("/fire-alarm")
    def fire_alarm(body: dict, request: Request):
        check_token(request)
        active = bool(body.get("active"))
        monitor.fire_alarm(active)
        return {"fire_alarm_suppressed": active}

    @app.get("/report/{length}")
    def report(length: int):
        return monitor.report_rows(length)

    @app.exception_handler(LeakwatchError)
    def leakwatch_error(_request, exc: LeakwatchError):
        return JSONResponse(status_code=500, content={"detail": str(exc)})

    ui_dir = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
    if ui_dir.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(
    config: EngineConfig,
    source,
    snapshot_path=None,
    snapshot_interval_min: int = 10,
    host: str = "127.0.0.1",
    port: int = 8000,
    api_token: str | None = None,
    follow: bool = False,
):
    """Run the monitor over a replay file with the API attached.

    `source` is a meter CSV path. Replay consumes it as fast as the
    engine allows (the clock is virtual, driven by sample timestamps);
    with follow=True the file is tailed for new rows afterwards.
    """
    import time

    import uvicorn

    from .metering import ingest_csv, to_flow

    monitor = Monitor(
        config,
        snapshot_path=snapshot_path,
        snapshot_interval_min=snapshot_interval_min,
        api_token=api_token,
    )
    app = build_app(monitor)

    stop = threading.Event()

    def pump():
        consumed = 0
        while not stop.is_set():
            samples = ingest_csv(Path(source).read_bytes())
            if len(samples) >= 2:
                flows = to_flow(samples, 1)
                monitor.consume(flows[consumed:] if follow else flows)
                consumed = len(flows)
            if not follow:
                break
            time.sleep(2.0)
        monitor.persist()

    thread = threading.Thread(target=pump, name="leakwatch-stream", daemon=True)
    thread.start()
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        stop.set()
        thread.join(timeout=10)
        monitor.persist()
