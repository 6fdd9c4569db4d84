"""Engine and server configuration file (INI keyed-text format).

Sections: [engine] for the model knobs, [detector] for criterion
thresholds, [server] for the monitor process. Every key is optional;
missing keys take the shipped defaults. See config.example.ini in the
repository root.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .detectors import DetectorConfig
from .engine import EngineConfig
from .errors import ConfigError
from .thresholds import StpVector, default_coefficients, load_coefficients


def _parse_pairs(text: str) -> list:
    pairs = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            t1, t2 = token.split(":")
            pairs.append((int(t1), int(t2)))
        except ValueError as exc:
            raise ConfigError(f"bad horizon pair {token!r}, expected T1:T2") from exc
    return pairs


def load_config(path=None) -> tuple:
    """Read (EngineConfig, server options) from an INI file.

    With path=None returns shipped defaults (successor horizon pairs).
    """
    parser = configparser.ConfigParser()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc

    eng = parser["engine"] if parser.has_section("engine") else {}
    det = parser["detector"] if parser.has_section("detector") else {}
    srv = parser["server"] if parser.has_section("server") else {}

    try:
        stp = StpVector(
            tuple(int(x) for x in str(eng.get("stp", "15,30,60,120,300,480,720")).split(","))
        )
        coeff_path = eng.get("coefficients", "")
        coefficients = (
            load_coefficients(Path(coeff_path).read_bytes())
            if coeff_path
            else default_coefficients()
        )
        pairs_text = det.get("horizon_pairs", "")
        horizon_pairs = _parse_pairs(pairs_text) if pairs_text else stp.successor_pairs()
        detector = DetectorConfig(
            pseudo_zero=float(det.get("pseudo_zero", 0.1)),
            zero_window=int(det.get("zero_window", 2)),
            sd=float(det.get("sd", 0.05)),
            steady_window=int(det.get("steady_window", 120)),
            steady_min_flow=float(det.get("steady_min_flow", 0.2)),
            horizon_pairs=horizon_pairs,
        )
        config = EngineConfig(
            detector=detector,
            stp=stp,
            alpha=float(eng.get("alpha", 0.05)),
            coefficients=coefficients,
            classifier_it=int(eng.get("classifier_it", 5)),
            learning_days=int(eng.get("learning_days", 14)),
        )
    except (ValueError, OSError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc

    server = {
        "snapshot_path": srv.get("snapshot_path", "") or None,
        "snapshot_interval_min": int(srv.get("snapshot_interval_min", 10)),
        "host": srv.get("host", "127.0.0.1"),
        "port": int(srv.get("port", 8000)),
        "api_token": srv.get("api_token", "") or None,
    }
    return config, server
