"""Acceptance suite: one test per shipping criterion.

Each test prints a single PASS line once its assertions hold (run with
`pytest tests/test_acceptance.py -v -s` to see them). Scenario seeds and
tolerances are frozen here; runtime budgets are asserted with a monotonic
clock.
"""

import json
import math
import time
from datetime import datetime, timedelta, timezone

import pytest

from leakwatch.cli import main as cli_main
from leakwatch.detectors import AlertState, Criterion, DetectorConfig, check_steady
from leakwatch.engine import DetectionEngine, EngineConfig
from leakwatch.metering import DayWindow, FlowSample
from leakwatch.patterns import (
    DailyTotals,
    PatternClass,
    classify_low,
    classify_stability,
    classify_totals,
)
from leakwatch.service import dump_snapshot
from leakwatch.simulate import (
    HouseholdProfile,
    LeakSpec,
    idle_trace,
    inject_air_pockets,
    inject_leak,
    simulate,
)
from leakwatch.stats import WindowStats, critical_value
from leakwatch.thresholds import (
    ReliabilityState,
    Verdict,
    c_coefficient,
    compose_md,
    compute_md,
    tune_md,
    update_reliability,
    CoefficientTable,
)

T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)
TOL = 1e-9


def ts(day, hour, minute=0):
    return datetime(2024, 1, day, hour, minute, tzinfo=timezone.utc)


def passed(n, text):
    print(f"ACCEPTANCE {n} PASS: {text}")


def test_criterion_1_leak_day_scenario():
    t_start = time.monotonic()
    trace = simulate(HouseholdProfile(seed=7, family_size=4), 15)
    # short bathtub burst (12 L) well before the leak, then a constant
    # 3 L/min leak from mid-morning onwards
    inject_leak(trace, LeakSpec(rate_lps=0.1, start=ts(15, 8, 18), end=ts(15, 8, 20)))
    inject_leak(trace, LeakSpec(rate_lps=0.05, start=ts(15, 10, 0)))

    engine = DetectionEngine(EngineConfig.with_successor_pairs())
    events = engine.push_many(trace.to_flows())
    elapsed = time.monotonic() - t_start

    pair = lambda e: engine.alerts[e.id].horizon == (15, 30)
    potentials = [
        e for e in events
        if e.state is AlertState.POTENTIAL
        and e.criterion is Criterion.AVERAGE_DEVIATION and pair(e)
    ]
    confirmed = [e for e in events if e.state is AlertState.CONFIRMED
                 and e.criterion is Criterion.AVERAGE_DEVIATION and pair(e)]
    expired = [e for e in events if e.state is AlertState.EXPIRED and pair(e)]

    assert len(potentials) >= 2
    assert len(confirmed) == 1
    assert confirmed[0].timestamp == ts(15, 10, 30)
    # the burst potential (and only it) expired as regular usage
    assert len(expired) == 1
    assert expired[0].span_start == ts(15, 8, 15)
    assert elapsed < 10.0
    passed(1, f"2+ potentials at T1=15, exactly 1 confirm at T2=30, burst expired "
              f"({elapsed:.1f}s)")


def test_criterion_2_steady_scenario_day_one():
    t_start = time.monotonic()
    trace = simulate(HouseholdProfile(seed=11, family_size=4), 1)
    for field in ("volumes_dl", "leak", "fire", "air_pocket"):
        setattr(trace, field, getattr(trace, field)[:180])  # 3-hour trace
    leak_start = ts(1, 0, 30)
    inject_leak(trace, LeakSpec(rate_lps=1.5 / 60, start=leak_start))

    engine = DetectionEngine(EngineConfig.with_successor_pairs())
    events = engine.push_many(trace.to_flows())
    elapsed = time.monotonic() - t_start

    assert engine.learning.in_learning  # day one, learning incomplete
    steady = [e for e in events if e.criterion is Criterion.STEADY_CONSUMPTION
              and e.state is AlertState.CONFIRMED]
    assert len(steady) == 1
    confirm_at = steady[0].timestamp
    assert confirm_at - leak_start <= timedelta(minutes=120)
    assert leak_start <= confirm_at <= trace.start + timedelta(minutes=180)
    assert elapsed < 5.0
    passed(2, f"steady criterion confirmed at {confirm_at:%H:%M} inside the leak span "
              f"with learning incomplete ({elapsed:.1f}s)")


def test_criterion_3_equation_unit_suite():
    # upper critical value: t branch and z branch
    assert critical_value(WindowStats(n=4, mean=10.0, m2=12.0)) == pytest.approx(12.353, abs=TOL)
    assert critical_value(WindowStats(n=100, mean=10.0, m2=4.0 * 99)) == pytest.approx(10.329, abs=TOL)

    # deviation ceiling: pseudo-zero fallback and scaled branch
    unit = CoefficientTable.uniform(
        {p: 1.0 for p in PatternClass}, {p: 0.5 for p in PatternClass}, rl=7
    )
    assert compute_md(DayWindow(0, 15), PatternClass.LOW,
                      WindowStats(n=14, mean=0.2, m2=0.0), unit) == 40.0
    assert compute_md(DayWindow(0, 15), PatternClass.STABLE,
                      WindowStats(n=4, mean=10.0, m2=12.0), unit) == pytest.approx(13.353, abs=TOL)

    # low-day test and low-pattern span rule
    assert classify_totals(DayWindow(0, 30), [15.0] * 14) is PatternClass.LOW
    assert classify_low([1] * 12 + [0] * 3) is True
    assert classify_low([1] * 11 + [0] * 4) is False

    # stability split on the sample std of daily totals
    assert classify_stability(DailyTotals(DayWindow(0, 30), [40.0, 60.0])) is PatternClass.MUTABLE
    assert classify_stability(
        DailyTotals(DayWindow(0, 30), [50.0, 52.0, 48.0, 51.0, 49.0])
    ) is PatternClass.STABLE

    # flat ceiling by resolution index
    assert c_coefficient(1) == 40.0
    assert c_coefficient(7) == 160.0

    # length-weighted composition
    assert compose_md([(15, 40.0), (45, 8.0)]) == pytest.approx(16.0, abs=TOL)
    assert compose_md([(30, 10.0), (30, 20.0)]) == pytest.approx(15.0, abs=TOL)

    # steady-consumption median band
    cfg = DetectorConfig()
    assert check_steady([3.0, 3.1, 2.9, 3.0, 10.0], cfg) is True
    assert check_steady([1, 2, 3, 4, 20, 30, 40], cfg) is False

    # reliability counters
    s = ReliabilityState()
    assert s.r == 1.0
    for verdict in (Verdict.REAL_LEAK, Verdict.FALSE_ALERT, Verdict.REAL_LEAK):
        s = update_reliability(s, verdict)
    assert (s.an, s.fn, s.ln) == (3, 1, 2) and s.r == pytest.approx(1.0, abs=TOL)
    all_false = update_reliability(
        update_reliability(ReliabilityState(), Verdict.FALSE_ALERT), Verdict.FALSE_ALERT
    )
    assert all_false.r == 0.0

    # threshold tuning branches
    assert tune_md(25.0, ReliabilityState()) == pytest.approx(25.0, abs=TOL)
    assert tune_md(10.0, all_false) == pytest.approx(15.5, abs=TOL)
    assert tune_md(10.0, ReliabilityState(an=2, fn=1, ln=2)) == pytest.approx(20.0, abs=TOL)
    passed(3, "all ten equations match their hand-computed oracles")


def test_criterion_4_false_alert_budget():
    t_start = time.monotonic()
    confirmed = 0
    for seed, family in ((7, 4), (21, 2), (99, 5)):
        trace = simulate(HouseholdProfile(seed=seed, family_size=family), 30)
        engine = DetectionEngine(EngineConfig.with_successor_pairs())
        events = engine.push_many(trace.to_flows())
        confirmed += sum(1 for e in events if e.state is AlertState.CONFIRMED)
    elapsed = time.monotonic() - t_start
    assert confirmed == 0
    assert elapsed < 60.0
    passed(4, f"0 confirmed alerts over 3 profiles x 30 leak-free days ({elapsed:.1f}s)")


def test_criterion_5_air_pocket_immunity():
    # learning phase: a blipped idle night alone
    night = idle_trace(360)
    inject_air_pockets(night, 20, seed=5)
    assert sum(night.air_pocket) == 20
    engine = DetectionEngine(EngineConfig.with_successor_pairs())
    assert engine.push_many(night.to_flows()) == []

    # post-learning: same blipped night appended to 14 idle days
    long_idle = idle_trace(14 * 1440)
    blipped = idle_trace(1440, start=T0 + timedelta(days=14))
    inject_air_pockets(blipped, 20, seed=5)
    engine = DetectionEngine(EngineConfig.with_successor_pairs())
    events = engine.push_many(long_idle.to_flows()) + engine.push_many(blipped.to_flows())
    assert not engine.learning.in_learning
    assert events == []
    passed(5, "20 blips on an idle night raise no alert of either criterion")


def test_criterion_6_sensitivity_floor():
    import numpy as np

    t_start = time.monotonic()
    detected = 0
    runs = 0
    for i in range(20):
        rng = np.random.default_rng([4242, i])
        seed = int(rng.integers(0, 10_000))
        family = int(rng.integers(1, 6))
        onset_minute = int(rng.integers(0, 1380))
        for rate_lpm in (3.0, 10.0):
            runs += 1
            trace = simulate(HouseholdProfile(seed=seed, family_size=family), 16)
            onset = trace.start + timedelta(days=14, minutes=onset_minute)
            inject_leak(trace, LeakSpec(rate_lps=rate_lpm / 60.0, start=onset))
            engine = DetectionEngine(EngineConfig.with_successor_pairs())
            events = engine.push_many(trace.to_flows())
            avg_ok = any(
                e.criterion is Criterion.AVERAGE_DEVIATION
                and e.state is AlertState.CONFIRMED
                and onset < e.timestamp <= onset + timedelta(minutes=60)  # 2 * T2
                for e in events
            )
            steady_ok = any(
                e.criterion is Criterion.STEADY_CONSUMPTION
                and e.state is AlertState.CONFIRMED
                and onset < e.timestamp <= onset + timedelta(minutes=120)
                for e in events
            )
            if avg_ok and steady_ok:
                detected += 1
    elapsed = time.monotonic() - t_start
    assert detected == runs == 40
    passed(6, f"3 and 10 L/min leaks confirmed in time in {detected}/{runs} seeded runs "
              f"({elapsed:.1f}s)")


def test_criterion_7_feedback_loop():
    # exact Eq 13/14 arithmetic on scripted verdict sequences
    identity = update_reliability(ReliabilityState(), Verdict.REAL_LEAK)
    assert identity.r == 1.0 and tune_md(12.0, identity) == pytest.approx(12.0, abs=TOL)
    zero_branch = update_reliability(
        update_reliability(ReliabilityState(), Verdict.FALSE_ALERT), Verdict.FALSE_ALERT
    )
    assert tune_md(10.0, zero_branch) == pytest.approx(0.5 * (2 + 1.1) * 10.0, abs=TOL)
    halved = ReliabilityState(an=2, fn=1, ln=2)
    assert halved.r == 0.5 and tune_md(10.0, halved) == pytest.approx(20.0, abs=TOL)

    # a marginal alert, judged false, silences the identical replay
    cfg = EngineConfig(
        detector=DetectorConfig(steady_min_flow=5.0, horizon_pairs=[(15, 30)])
    )
    flat = [FlowSample(T0 + timedelta(minutes=i), 1, 1.0) for i in range(14 * 1440)]
    learner = DetectionEngine(cfg)
    learner.push_many(flat)
    fitted = learner.snapshot()

    day15 = [
        FlowSample(T0 + timedelta(days=14, minutes=i), 1, 1.23) for i in range(600)
    ]
    first = DetectionEngine.restore(fitted, cfg)
    events = first.push_many(day15)
    confirmed = [e for e in events if e.state is AlertState.CONFIRMED]
    assert len(confirmed) == 1
    origin = first.alerts[confirmed[0].id].window
    md_before = first.raw_md(origin)
    reliability, tuned = first.apply_verdict(confirmed[0].id, Verdict.FALSE_ALERT)
    assert reliability.r == 0.0
    assert tuned == pytest.approx(0.5 * (1 + 1.1) * md_before, abs=TOL)
    assert tuned > md_before

    rerun = DetectionEngine.restore(fitted, cfg)
    rerun.tmd.update(first.tmd)
    replay_events = rerun.push_many(day15)
    origin_span = (confirmed[0].id and first.alerts[confirmed[0].id].span_start,
                   first.alerts[confirmed[0].id].span_end)
    assert all(
        (e.span_start, e.span_end) != origin_span for e in replay_events
    ), "tuned window re-alerted"
    passed(7, "Eq 13/14 arithmetic exact; false verdict raises TMD and silences the window")


def test_criterion_8_determinism(tmp_path):
    # every CLI command byte-identical across two seeded runs
    outputs = {}
    for tag in ("x", "y"):
        base = tmp_path / tag
        base.mkdir()
        trace = base / "t.csv"
        assert cli_main(["simulate", "--family", "4", "--days", "15", "--seed", "7",
                         "--leak", "3Lpm@day15T10:00-", "--out", str(trace)]) == 0
        report = base / "alerts.jsonl"
        assert cli_main(["detect", "--trace", str(trace), "--report", str(report)]) == 0
        tables = base / "rpt"
        assert cli_main(["report", "--trace", str(trace), "--alerts", str(report),
                         "--out", str(tables)]) == 0
        corpus = base / "corpus"
        corpus.mkdir()
        assert cli_main(["simulate", "--family", "2", "--days", "15", "--seed", "21",
                         "--out", str(corpus / "clean.csv")]) == 0
        coeffs = base / "coeffs.csv"
        assert cli_main(["calibrate", "--corpus", str(corpus), "--budget", "0",
                         "--out", str(coeffs), "--grid-a", "1.2,1.3",
                         "--grid-b", "1,2", "--passes", "1"]) == 0
        outputs[tag] = [
            trace.read_bytes(),
            (base / "t.labels.jsonl").read_bytes(),
            report.read_bytes(),
            (tables / "report_T15.csv").read_bytes(),
            (tables / "report_T30.csv").read_bytes(),
            coeffs.read_bytes(),
        ]
    assert outputs["x"] == outputs["y"]

    # snapshot persist -> restore -> persist is byte-identical
    trace = simulate(HouseholdProfile(seed=7), 15)
    engine = DetectionEngine(EngineConfig.with_successor_pairs())
    engine.push_many(trace.to_flows())
    blob = dump_snapshot(engine.snapshot())
    restored = DetectionEngine.restore(json.loads(blob), engine.config)
    assert dump_snapshot(restored.snapshot()) == blob
    passed(8, "CLI outputs and state snapshots byte-identical across reruns")
