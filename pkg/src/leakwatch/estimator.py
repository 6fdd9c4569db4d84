"""Scikit-learn style front door for the detection engine.

The model is naturally fit/predict shaped: fit consumes a learning trace
(ideally the two-week primary period) and freezes window statistics plus
the pattern schedule; predict replays new flow data through a detection
engine seeded with that state and returns the alert transitions. Being a
BaseEstimator, it clones and grid-searches like any other estimator.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .detectors import DetectorConfig
from .engine import DetectionEngine, EngineConfig
from .metering import FlowSample, MissingInterval
from .thresholds import StpVector, default_coefficients


def _as_flows(X, start=None):
    """Validate predict/fit input into a 1-minute flow list.

    Accepts a list of FlowSample / MissingInterval, or a 1-D array-like
    of per-minute liters (requires `start`, a timezone-aware datetime).
    """
    if isinstance(X, (list, tuple)) and X and isinstance(
        X[0], (FlowSample, MissingInterval)
    ):
        return list(X)
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected 1-D per-minute volumes, got shape {arr.shape}")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("volumes must be finite and non-negative")
    if start is None:
        raise ValueError("array input needs a `start` timestamp")
    if start.tzinfo is None:
        start = start.replace(tzinfo=timezone.utc)
    return [
        FlowSample(start + timedelta(minutes=i), 1, float(v))
        for i, v in enumerate(arr)
    ]


class LeakDetector(BaseEstimator):
    """Two-criterion leak detector with a two-week learning period.

    Parameters mirror the engine configuration; all are plain values so
    get_params/set_params/clone behave as usual.
    """

    def __init__(
        self,
        stp=(15, 30, 60, 120, 300, 480, 720),
        alpha=0.05,
        coefficients=None,
        pseudo_zero=0.1,
        zero_window=2,
        sd=0.05,
        steady_window=120,
        steady_min_flow=0.2,
        horizon_pairs=None,
        classifier_it=5,
        learning_days=14,
    ):
        self.stp = stp
        self.alpha = alpha
        self.coefficients = coefficients
        self.pseudo_zero = pseudo_zero
        self.zero_window = zero_window
        self.sd = sd
        self.steady_window = steady_window
        self.steady_min_flow = steady_min_flow
        self.horizon_pairs = horizon_pairs
        self.classifier_it = classifier_it
        self.learning_days = learning_days

    def _engine_config(self) -> EngineConfig:
        stp = StpVector(tuple(self.stp))
        pairs = self.horizon_pairs
        if pairs is None:
            pairs = stp.successor_pairs()
        detector = DetectorConfig(
            pseudo_zero=self.pseudo_zero,
            zero_window=self.zero_window,
            sd=self.sd,
            steady_window=self.steady_window,
            steady_min_flow=self.steady_min_flow,
            horizon_pairs=[tuple(p) for p in pairs],
        )
        coeffs = self.coefficients if self.coefficients is not None else default_coefficients()
        return EngineConfig(
            detector=detector,
            stp=stp,
            alpha=self.alpha,
            coefficients=coeffs,
            classifier_it=self.classifier_it,
            learning_days=self.learning_days,
        )

    def fit(self, X, y=None, start: datetime | None = None):
        """Learn window statistics and the pattern schedule from X.

        X: list of FlowSample/MissingInterval at 1-minute spacing, or a
        1-D array of per-minute liters anchored at `start`.
        """
        flows = _as_flows(X, start)
        engine = DetectionEngine(self._engine_config())
        engine.push_many(flows)
        self.fitted_state_ = engine.snapshot()
        self.n_learning_days_ = engine.learning.elapsed_days
        self.schedule_ = dict(engine.schedule)
        self.window_stats_ = dict(engine.window_stats)
        return self

    def _restored_engine(self) -> DetectionEngine:
        if not hasattr(self, "fitted_state_"):
            raise NotFittedError("LeakDetector is not fitted; call fit first")
        return DetectionEngine.restore(self.fitted_state_, self._engine_config())

    def predict(self, X, start: datetime | None = None):
        """Replay X through a detection engine seeded with the fitted
        state; returns the list of AlertEvent transitions (fit state is
        left untouched, so predict is repeatable)."""
        flows = _as_flows(X, start)
        engine = self._restored_engine()
        return engine.push_many(flows)

    def decision_engine(self) -> DetectionEngine:
        """A live engine carrying the fitted state, for streaming use."""
        return self._restored_engine()
