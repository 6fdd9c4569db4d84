"""Operator command line: simulate, detect, report, calibrate, serve.

Every command is deterministic under fixed seeds and inputs; outputs are
byte-stable across reruns. Exit codes: 0 success, 1 runtime/input error,
2 bad flags, 3 calibration budget unreachable.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

from .calibrate import DEFAULT_GRID_A, DEFAULT_GRID_B, calibrate, load_corpus
from .config import load_config
from .detectors import AlertState, Criterion
from .engine import DetectionEngine
from .errors import LeakwatchError
from .metering import ingest_csv, to_flow
from .report import build_report, rows_to_csv
from .simulate import (
    HouseholdProfile,
    LeakSpec,
    emit_labels,
    emit_meta,
    emit_meter_csv,
    inject_air_pockets,
    inject_fire_surge,
    inject_leak,
    simulate,
)
from .thresholds import dump_coefficients

_LEAK_RE = re.compile(
    r"^(\d+(?:\.\d+)?)Lpm@day(\d+)T(\d{1,2}):(\d{2})-(?:(\d{1,2}):(\d{2}))?$"
)


def parse_leak_spec(text: str, start_date: date, total_days: int):
    """`<rate>Lpm@day<D>T<HH:MM>-[<HH:MM>]`: constant leak in liters per
    minute from day D (1-based) at HH:MM, optionally ending the same day."""
    m = _LEAK_RE.match(text.strip())
    if m is None:
        raise ValueError(
            f"bad leak spec {text!r}; expected e.g. 1.5Lpm@day15T10:00- or "
            "3Lpm@day15T10:00-11:30"
        )
    rate_lpm = float(m.group(1))
    day = int(m.group(2))
    if not 1 <= day <= max(total_days, 1):
        raise ValueError(f"leak day {day} outside the simulated {total_days} days")
    base = datetime(
        start_date.year, start_date.month, start_date.day, tzinfo=timezone.utc
    ) + timedelta(days=day - 1)
    start = base + timedelta(hours=int(m.group(3)), minutes=int(m.group(4)))
    end = None
    if m.group(5) is not None:
        end = base + timedelta(hours=int(m.group(5)), minutes=int(m.group(6)))
        if end <= start:
            raise ValueError(f"leak spec {text!r} ends before it starts")
    return LeakSpec(rate_lps=rate_lpm / 60.0, start=start, end=end)


def _write_events(path: Path, events) -> None:
    lines = [
        json.dumps(e.to_json_obj(), sort_keys=True, separators=(",", ":"))
        for e in events
    ]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def _summarize(events) -> str:
    counts: dict = {}
    for e in events:
        key = (e.criterion.value, e.state.value)
        counts[key] = counts.get(key, 0) + 1
    parts = [f"{c}/{s}={n}" for (c, s), n in sorted(counts.items())]
    return " ".join(parts) if parts else "no alerts"


def cmd_simulate(args, parser) -> int:
    start = date(2024, 1, 1)
    profile = HouseholdProfile(family_size=args.family, seed=args.seed)
    trace = simulate(profile, args.days, start=start)
    try:
        for spec_text in args.leak or []:
            trace = inject_leak(trace, parse_leak_spec(spec_text, start, args.days))
        if args.fire:
            spec = parse_leak_spec(args.fire, start, args.days)
            if spec.end is None:
                raise ValueError("fire surge spec needs an explicit end time")
            trace = inject_fire_surge(trace, spec.start, spec.end, spec.rate_lps)
    except (ValueError, LeakwatchError) as exc:
        parser.error(str(exc))  # exits 2
    if args.air_pockets:
        trace = inject_air_pockets(trace, args.air_pockets, seed=args.seed)

    out = Path(args.out)
    out.write_bytes(emit_meter_csv(trace, initial_reading=args.initial_reading))
    out.with_name(out.stem + ".labels.jsonl").write_bytes(emit_labels(trace))
    out.with_name(out.stem + ".meta.json").write_bytes(emit_meta(trace))
    print(f"wrote {out} ({len(trace)} minutes, {trace.total_liters():.1f} L)")
    return 0


def cmd_detect(args, parser) -> int:
    config, _server = load_config(args.config)
    try:
        samples = ingest_csv(Path(args.trace).read_bytes())
        flows = to_flow(samples, 1)
    except (OSError, LeakwatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    engine = DetectionEngine(config)
    events = engine.push_many(flows)
    _write_events(Path(args.report), events)
    confirmed = sum(1 for e in events if e.state is AlertState.CONFIRMED)
    print(_summarize(events))
    print(f"confirmed={confirmed} report={args.report}")
    return 0


def cmd_report(args, parser) -> int:
    config, _server = load_config(args.config)
    try:
        samples = ingest_csv(Path(args.trace).read_bytes())
        flows = to_flow(samples, 1)
        alert_lines = Path(args.alerts).read_text(encoding="utf-8").splitlines()
    except (OSError, LeakwatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    # final state per alert id, applied to every span that id touched
    final_state: dict = {}
    spans_by_id: dict = {}
    for line in alert_lines:
        if not line.strip():
            continue
        obj = json.loads(line)
        final_state[obj["id"]] = obj["state"]
        spans_by_id.setdefault(obj["id"], set()).add(tuple(obj["span"]))
    state_by_span: dict = {}
    for aid, spans in spans_by_id.items():
        for span in spans:
            state_by_span[span] = final_state[aid]

    tables, _events = build_report(flows, config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    last_day = flows[-1].interval_start.date()
    base = datetime(
        last_day.year, last_day.month, last_day.day, tzinfo=timezone.utc
    )
    from .metering import format_timestamp

    for length, rows in tables.items():
        for row in rows:
            w = row["window"]
            span = (
                format_timestamp(base + timedelta(minutes=w.start_offset)),
                format_timestamp(base + timedelta(minutes=w.end_offset)),
            )
            row["alert_state"] = state_by_span.get(span)
        path = out_dir / f"report_T{length}.csv"
        path.write_bytes(rows_to_csv(rows))
    print(f"wrote {len(tables)} tables to {out_dir}")
    return 0


def cmd_calibrate(args, parser) -> int:
    config, _server = load_config(args.config)
    try:
        corpus = load_corpus(args.corpus, config)
    except (OSError, ValueError, LeakwatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    grid_a = tuple(float(x) for x in args.grid_a.split(",")) if args.grid_a else DEFAULT_GRID_A
    grid_b = tuple(float(x) for x in args.grid_b.split(",")) if args.grid_b else DEFAULT_GRID_B
    table, missed, false, ok = calibrate(
        corpus, config, budget=args.budget, grid_a=grid_a, grid_b=grid_b,
        passes=args.passes,
    )
    comment = (
        f"calibrated on {len(corpus)} traces: missed={missed} false={false} "
        f"budget={args.budget}"
    )
    Path(args.out).write_text(dump_coefficients(table, comment), encoding="utf-8")
    print(f"{comment} -> {args.out}")
    if not ok:
        print("false-alert budget unreachable; wrote best found", file=sys.stderr)
        return 3
    return 0


def cmd_serve(args, parser) -> int:
    from .service import serve

    config, server = load_config(args.config)
    if args.snapshot:
        server["snapshot_path"] = args.snapshot
    if args.host:
        server["host"] = args.host
    if args.port:
        server["port"] = args.port
    try:
        serve(
            config,
            args.source,
            snapshot_path=server["snapshot_path"],
            snapshot_interval_min=server["snapshot_interval_min"],
            host=server["host"],
            port=server["port"],
            api_token=server["api_token"],
            follow=args.follow,
        )
    except (OSError, LeakwatchError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leakwatch", description="Domestic water leak detection toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a labeled household trace")
    p.add_argument("--family", type=int, default=4)
    p.add_argument("--days", type=int, default=15)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--leak", action="append", metavar="SPEC",
                   help="e.g. 1.5Lpm@day15T10:00- (repeatable)")
    p.add_argument("--fire", metavar="SPEC", help="fire surge, needs an end time")
    p.add_argument("--air-pockets", type=int, default=0)
    p.add_argument("--initial-reading", type=float, default=0.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("detect", help="run offline detection over a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--report", required=True, help="output alert JSONL path")

    p = sub.add_parser("report", help="per-window consumption vs. threshold tables")
    p.add_argument("--trace", required=True)
    p.add_argument("--alerts", required=True, help="alert JSONL from detect")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("calibrate", help="grid-search coefficients on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--budget", type=int, default=0)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--grid-a", default=None, help="comma list of a values")
    p.add_argument("--grid-b", default=None, help="comma list of b values")
    p.add_argument("--passes", type=int, default=2)

    p = sub.add_parser("serve", help="run the monitor service over a source")
    p.add_argument("--source", required=True, help="meter CSV to replay/follow")
    p.add_argument("--config", default=None)
    p.add_argument("--snapshot", default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--follow", action="store_true")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "detect": cmd_detect,
        "report": cmd_report,
        "calibrate": cmd_calibrate,
        "serve": cmd_serve,
    }
    try:
        return handlers[args.command](args, parser)
    except LeakwatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
