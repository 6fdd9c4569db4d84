"""Monitor service: HTTP surface, persistence, feedback loop."""

import json
from datetime import datetime, timedelta, timezone

import pytest
from fastapi.testclient import TestClient

from leakwatch.config import load_config
from leakwatch.detectors import DetectorConfig
from leakwatch.engine import DetectionEngine, EngineConfig
from leakwatch.errors import SnapshotError
from leakwatch.metering import FlowSample
from leakwatch.service import (
    Monitor,
    build_app,
    dump_snapshot,
    load_snapshot,
    save_snapshot,
)
from leakwatch.simulate import HouseholdProfile, LeakSpec, inject_leak, simulate

T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)


def leak_day_monitor(tmp_path, snapshot=True):
    trace = simulate(HouseholdProfile(seed=7), 15)
    inject_leak(trace, LeakSpec(rate_lps=0.05, start=T0 + timedelta(days=14, hours=10)))
    config, _ = load_config(None)
    monitor = Monitor(
        config,
        snapshot_path=tmp_path / "state.json" if snapshot else None,
        snapshot_interval_min=720,
    )
    monitor.consume(trace.to_flows())
    return monitor


@pytest.fixture(scope="module")
def monitor(tmp_path_factory):
    return leak_day_monitor(tmp_path_factory.mktemp("svc"))


@pytest.fixture(scope="module")
def client(monitor):
    return TestClient(build_app(monitor))


class TestStatus:
    def test_fresh_monitor_is_learning(self):
        config, _ = load_config(None)
        m = Monitor(config)
        status = m.status()
        assert status["in_learning"] is True
        assert status["elapsed_days"] == 0

    def test_learning_complete_after_replay(self, client):
        status = client.get("/status").json()
        assert status["in_learning"] is False
        assert status["elapsed_days"] == 15
        assert status["reliability_r"] == 1.0
        assert status["open_alerts"] > 0


class TestAlerts:
    def test_filter_confirmed(self, client):
        alerts = client.get("/alerts", params={"state": "Confirmed"}).json()
        assert alerts
        assert all(a["state"] == "Confirmed" for a in alerts)

    def test_filter_excludes_other_states(self, client):
        potential = client.get("/alerts", params={"state": "Potential"}).json()
        assert all(a["state"] == "Potential" for a in potential)

    def test_unknown_filter_is_400(self, client):
        assert client.get("/alerts", params={"state": "Nope"}).status_code == 400

    def test_empty_store_yields_empty_list(self):
        config, _ = load_config(None)
        m = Monitor(config)
        assert m.alerts() == []

    def test_timestamp_ordered(self, client):
        alerts = client.get("/alerts").json()
        raised = [a["raised_at"] for a in alerts]
        assert raised == sorted(raised)


class TestVerdicts:
    def test_false_then_conflict_then_missing(self, tmp_path):
        monitor = leak_day_monitor(tmp_path)
        client = TestClient(build_app(monitor))
        confirmed = client.get("/alerts", params={"state": "Confirmed"}).json()
        aid = confirmed[0]["id"]

        first = client.post(f"/alerts/{aid}/verdict", json={"verdict": "false"})
        assert first.status_code == 200
        body = first.json()
        # Eq 13: AN=1, FN=1, LN=0 -> r = 0; Eq 14: TMD = 0.5*(1+1.1)*MD
        assert body["r"] == 0.0
        assert (body["an"], body["fn"], body["ln"]) == (1, 1, 0)
        assert body["tmd"] is not None

        again = client.post(f"/alerts/{aid}/verdict", json={"verdict": "false"})
        assert again.status_code == 409

        missing = client.post("/alerts/424242/verdict", json={"verdict": "real"})
        assert missing.status_code == 404

    def test_real_leak_keeps_identity_tuning(self, tmp_path):
        monitor = leak_day_monitor(tmp_path)
        client = TestClient(build_app(monitor))
        confirmed = client.get("/alerts", params={"state": "Confirmed"}).json()
        aid = confirmed[0]["id"]
        body = client.post(f"/alerts/{aid}/verdict", json={"verdict": "real"}).json()
        assert body["r"] == 1.0  # AN=1, FN=0, LN=1
        status = client.get("/status").json()
        assert status["reliability_r"] == 1.0

    def test_bad_verdict_value_is_400(self, tmp_path):
        monitor = leak_day_monitor(tmp_path)
        client = TestClient(build_app(monitor))
        resp = client.post("/alerts/1/verdict", json={"verdict": "maybe"})
        assert resp.status_code == 400

    def test_r_recomputable_from_alert_log(self, tmp_path):
        # the exposed r must always equal the ratio rebuilt from judged
        # alert states alone
        monitor = leak_day_monitor(tmp_path)
        client = TestClient(build_app(monitor))
        confirmed = client.get("/alerts", params={"state": "Confirmed"}).json()
        for alert, verdict in zip(confirmed[:3], ("false", "real", "real")):
            client.post(f"/alerts/{alert['id']}/verdict", json={"verdict": verdict})
        alerts = client.get("/alerts").json()
        an = sum(1 for a in alerts if a["state"] in ("JudgedReal", "JudgedFalse"))
        fn = sum(1 for a in alerts if a["state"] == "JudgedFalse")
        ln = sum(1 for a in alerts if a["state"] == "JudgedReal")
        expected = 1.0 if an == 0 else (0.0 if ln == 0 else (an - fn) / ln)
        assert client.get("/status").json()["reliability_r"] == pytest.approx(expected)


class TestFireAlarm:
    def test_toggle_reflected_in_status(self, tmp_path):
        config, _ = load_config(None)
        monitor = Monitor(config)
        client = TestClient(build_app(monitor))
        assert client.post("/fire-alarm", json={"active": True}).status_code == 200
        assert client.get("/status").json()["fire_alarm_suppressed"] is True
        client.post("/fire-alarm", json={"active": False})
        assert client.get("/status").json()["fire_alarm_suppressed"] is False


class TestSnapshots:
    def test_roundtrip_byte_identical(self, tmp_path):
        monitor = leak_day_monitor(tmp_path)
        monitor.persist()
        path = monitor.snapshot_path
        first = path.read_bytes()
        restored = DetectionEngine.restore(load_snapshot(path), monitor.config)
        assert dump_snapshot(restored.snapshot()) == first

    def test_corrupt_snapshot_names_file(self, tmp_path):
        bad = tmp_path / "state.json"
        bad.write_text("{not json")
        config, _ = load_config(None)
        with pytest.raises(SnapshotError) as err:
            Monitor(config, snapshot_path=bad)
        assert "state.json" in str(err.value)

    def test_config_change_refuses_stale_snapshot(self, tmp_path):
        config, _ = load_config(None)
        m = Monitor(config, snapshot_path=tmp_path / "state.json")
        m.consume(
            [FlowSample(T0 + timedelta(minutes=i), 1, 0.5) for i in range(30)]
        )
        m.persist()
        other = EngineConfig(
            detector=DetectorConfig(sd=0.10, horizon_pairs=config.detector.horizon_pairs),
            stp=config.stp,
            alpha=config.alpha,
            coefficients=config.coefficients,
        )
        with pytest.raises(SnapshotError):
            Monitor(other, snapshot_path=tmp_path / "state.json")

    def test_restart_resumes_without_relearning(self, tmp_path):
        trace = simulate(HouseholdProfile(seed=7), 15)
        inject_leak(
            trace, LeakSpec(rate_lps=0.05, start=T0 + timedelta(days=14, hours=10))
        )
        flows = trace.to_flows()
        config, _ = load_config(None)

        single = Monitor(config, snapshot_path=tmp_path / "one.json")
        single.consume(flows)
        single.persist()

        half = len(flows) // 2
        first = Monitor(config, snapshot_path=tmp_path / "two.json")
        first.consume(flows[:half])
        first.persist()
        second = Monitor(config, snapshot_path=tmp_path / "two.json")
        second.consume(flows)  # overlap skipped via last_processed
        second.persist()

        assert (tmp_path / "one.json").read_bytes() == (tmp_path / "two.json").read_bytes()


class TestReportEndpoint:
    def test_rows_for_smallest_length(self, client):
        rows = client.get("/report/15").json()
        assert len(rows) == 96
        assert {"window_start", "consumption", "md", "tmd", "alert_state"} <= set(rows[0])


class TestDashboardAssets:
    def test_ui_served_when_built(self, client):
        from pathlib import Path

        dist = Path(__file__).resolve().parent.parent / "frontend" / "dist"
        if not dist.is_dir():
            pytest.skip("frontend not built")
        page = client.get("/ui/")
        assert page.status_code == 200
        assert b"leakwatch" in page.content
        assert client.get("/ui/app.js").status_code == 200


class TestToken:
    def test_mutations_require_token_when_configured(self, tmp_path):
        config, _ = load_config(None)
        monitor = Monitor(config, api_token="sekrit")
        client = TestClient(build_app(monitor))
        assert client.post("/fire-alarm", json={"active": True}).status_code == 401
        ok = client.post(
            "/fire-alarm", json={"active": True},
            headers={"Authorization": "Bearer sekrit"},
        )
        assert ok.status_code == 200
        # reads stay open
        assert client.get("/status").status_code == 200
