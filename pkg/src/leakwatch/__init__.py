"""Leak detection for domestic water meters.

Statistical deviation thresholds over clock-anchored windows, a steady-
consumption median filter, pattern-aware learning, and a reproducible
household consumption simulator.
"""

from .detectors import AlertEvent, AlertRecord, AlertState, Criterion, DetectorConfig
from .engine import DetectionEngine, EngineConfig
from .errors import LeakwatchError
from .estimator import LeakDetector
from .metering import DayWindow, FlowSample, MeterSample, MissingInterval, ingest_csv, to_flow
from .patterns import PatternClass
from .simulate import HouseholdProfile, LeakSpec, Trace, simulate
from .thresholds import ReliabilityState, StpVector, Verdict

__version__ = "0.1.0"

__all__ = [
    "AlertEvent",
    "AlertRecord",
    "AlertState",
    "Criterion",
    "DayWindow",
    "DetectionEngine",
    "DetectorConfig",
    "EngineConfig",
    "FlowSample",
    "HouseholdProfile",
    "LeakDetector",
    "LeakSpec",
    "LeakwatchError",
    "MeterSample",
    "MissingInterval",
    "PatternClass",
    "ReliabilityState",
    "StpVector",
    "Trace",
    "Verdict",
    "ingest_csv",
    "simulate",
    "to_flow",
    "__version__",
]
