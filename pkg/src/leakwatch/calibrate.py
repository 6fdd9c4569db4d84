"""Coefficient calibration against a labeled trace corpus.

Grid-searches the per-pattern (a, b) deviation coefficients to minimize
missed leaks subject to a false-alert budget. Learning is coefficient-
independent, so each trace is fitted once and candidates only replay the
post-learning days, which keeps the search tractable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .detectors import AlertState, Criterion
from .engine import DetectionEngine, EngineConfig
from .metering import ingest_csv, parse_timestamp, to_flow
from .patterns import PatternClass
from .thresholds import CoefficientTable

DEFAULT_GRID_A = (1.0, 1.1, 1.2, 1.3, 1.4, 1.5)
DEFAULT_GRID_B = (0.5, 1.0, 2.0, 3.0)
#: A confirm this close after leak activity counts as detecting it.
LEAK_ATTRIBUTION_MIN = 120


@dataclass
class CorpusTrace:
    name: str
    fit_state: dict
    detection_flows: list
    leak_minutes: list  # [(start_ts, end_ts)] contiguous leak spans
    steady_false: int  # coefficient-independent false confirms seen in fit


def _leak_spans(label_path: Path) -> list:
    spans = []
    current_start = None
    last_ts = None
    for line in label_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        ts = parse_timestamp(obj["t"])
        if obj.get("leak"):
            if current_start is None:
                current_start = ts
            last_ts = ts
        elif current_start is not None:
            spans.append((current_start, last_ts))
            current_start = None
    if current_start is not None:
        spans.append((current_start, last_ts))
    return spans


def load_corpus(corpus_dir, config: EngineConfig) -> list:
    """Fit each <name>.csv / <name>.labels.jsonl pair once."""
    corpus_dir = Path(corpus_dir)
    traces = []
    for csv_path in sorted(corpus_dir.glob("*.csv")):
        label_path = csv_path.parent / (csv_path.stem + ".labels.jsonl")
        if not label_path.exists():
            continue
        samples = ingest_csv(csv_path.read_bytes())
        flows = to_flow(samples, 1)
        split = config.learning_days * 1440
        engine = DetectionEngine(config)
        fit_events = engine.push_many(flows[:split])
        steady_false = sum(
            1 for e in fit_events
            if e.criterion is Criterion.STEADY_CONSUMPTION
            and e.state is AlertState.CONFIRMED
        )
        traces.append(
            CorpusTrace(
                name=csv_path.stem,
                fit_state=engine.snapshot(),
                detection_flows=flows[split:],
                leak_minutes=_leak_spans(label_path),
                steady_false=steady_false,
            )
        )
    if not traces:
        raise ValueError(f"no labeled traces found in {corpus_dir}")
    return traces


def _confirm_is_true(ts, spans) -> bool:
    for start, end in spans:
        if start <= ts and (ts - end).total_seconds() / 60.0 <= LEAK_ATTRIBUTION_MIN:
            return True
    return False


def evaluate(table: CoefficientTable, corpus, config: EngineConfig) -> tuple:
    """(missed_leaks, false_confirms) for one candidate table."""
    cfg = EngineConfig(
        detector=config.detector,
        stp=config.stp,
        alpha=config.alpha,
        coefficients=table,
        classifier_it=config.classifier_it,
        learning_days=config.learning_days,
    )
    missed = 0
    false = 0
    for trace in corpus:
        engine = DetectionEngine.restore(trace.fit_state, cfg)
        events = engine.push_many(trace.detection_flows)
        confirms = [
            e for e in events
            if e.state is AlertState.CONFIRMED
            and e.criterion is Criterion.AVERAGE_DEVIATION
        ]
        false += trace.steady_false
        for e in events:
            if (
                e.state is AlertState.CONFIRMED
                and e.criterion is Criterion.STEADY_CONSUMPTION
                and not _confirm_is_true(e.timestamp, trace.leak_minutes)
            ):
                false += 1
        for e in confirms:
            if not _confirm_is_true(e.timestamp, trace.leak_minutes):
                false += 1
        for start, end in trace.leak_minutes:
            hit = any(
                start <= e.timestamp
                and (e.timestamp - end).total_seconds() / 60.0 <= LEAK_ATTRIBUTION_MIN
                for e in confirms
            )
            if not hit:
                missed += 1
    return missed, false


def calibrate(
    corpus,
    config: EngineConfig,
    budget: int = 0,
    grid_a=DEFAULT_GRID_A,
    grid_b=DEFAULT_GRID_B,
    passes: int = 2,
):
    """Coordinate-descent grid search, one pattern at a time.

    Returns (table, missed, false, within_budget). Deterministic: grids
    and corpus are iterated in fixed order, ties break toward smaller
    coefficients.
    """
    best_ab = {
        p: (config.coefficients.a[(p, 1)], config.coefficients.b[(p, 1)])
        for p in PatternClass
    }
    rl = config.stp.resolution_level

    def table_for(ab) -> CoefficientTable:
        return CoefficientTable.uniform(
            {p: ab[p][0] for p in PatternClass},
            {p: ab[p][1] for p in PatternClass},
            rl,
        )

    def score(ab):
        missed, false = evaluate(table_for(ab), corpus, config)
        over = max(0, false - budget)
        return (over, missed, false)

    current = dict(best_ab)
    current_score = score(current)
    for _ in range(passes):
        improved = False
        for pattern in PatternClass:
            for a in grid_a:
                for b in grid_b:
                    if (a, b) == current[pattern]:
                        continue
                    candidate = dict(current)
                    candidate[pattern] = (a, b)
                    cand_score = score(candidate)
                    tie_break = (a + b, a) < (
                        current[pattern][0] + current[pattern][1],
                        current[pattern][0],
                    )
                    if cand_score < current_score or (
                        cand_score == current_score and tie_break
                    ):
                        current = candidate
                        current_score = cand_score
                        improved = True
        if not improved:
            break

    missed, false = evaluate(table_for(current), corpus, config)
    return table_for(current), missed, false, false <= budget
