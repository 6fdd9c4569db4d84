"""Maximum-deviation thresholds, their coefficients, and feedback tuning.

The deviation ceiling for a window is a(T)*K + b(T)*S with (a, b) picked
by the window's pattern and its position in the short-time-period vector;
windows whose critical value is pseudo-zero fall back to the flat ceiling
c(T) = 20*(1+n). Human verdicts on alerts drive a reliability coefficient
that retunes the ceiling per window.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources

from .errors import (
    ConfigError,
    EmptySegments,
    IndexOutOfRange,
    LearningIncomplete,
    UndefinedTuning,
    WindowNotInStp,
)
from .metering import DayWindow
from .patterns import LearningState, PatternClass
from .stats import CriticalValueTable, DEFAULT_TABLE, WindowStats, critical_value

#: Critical values at or below this (liters) count as pseudo-zero and take
#: the flat c(T) ceiling instead of the scaled one.
PSEUDO_ZERO_K_LIMIT_L = 0.3


@dataclass(frozen=True)
class StpVector:
    """Ordered short-time-period lengths (minutes); index is 1-based."""

    lengths: tuple

    def __post_init__(self):
        lengths = tuple(self.lengths)
        object.__setattr__(self, "lengths", lengths)
        if len(lengths) < 2:
            raise ValueError("need at least two short-time-period lengths")
        if any(l <= 0 for l in lengths):
            raise ValueError("window lengths must be positive")
        if any(a >= b for a, b in zip(lengths, lengths[1:])):
            raise ValueError("window lengths must be strictly increasing")

    def __iter__(self):
        return iter(self.lengths)

    def __len__(self):
        return len(self.lengths)

    def __contains__(self, length: int) -> bool:
        return length in self.lengths

    @property
    def resolution_level(self) -> int:
        return len(self.lengths)

    def index_of(self, length: int) -> int:
        """1-based position of `length`; raises WindowNotInStp otherwise."""
        try:
            return self.lengths.index(length) + 1
        except ValueError:
            raise WindowNotInStp(
                f"window length {length} not in STP {self.lengths}"
            ) from None

    def successor_pairs(self) -> list:
        """Default detection horizons: each length paired with the next."""
        return list(zip(self.lengths, self.lengths[1:]))


DEFAULT_STP = StpVector((15, 30, 60, 120, 300, 480, 720))

_PATTERN_KEYS = {
    "low": PatternClass.LOW,
    "stable": PatternClass.STABLE,
    "mutable": PatternClass.MUTABLE,
}


@dataclass(frozen=True)
class CoefficientTable:
    """Per-pattern, per-STP-index (a, b) coefficient pairs, all >= 0."""

    a: dict
    b: dict

    def __post_init__(self):
        for name, table in (("a", self.a), ("b", self.b)):
            for key, value in table.items():
                if value < 0:
                    raise ConfigError(f"coefficient {name}{key} is negative: {value}")

    def lookup(self, pattern: PatternClass, stp_index: int) -> tuple:
        try:
            return self.a[(pattern, stp_index)], self.b[(pattern, stp_index)]
        except KeyError:
            raise ConfigError(
                f"no coefficients for pattern {pattern.value}, index {stp_index}"
            ) from None

    @classmethod
    def uniform(cls, a_by_pattern: dict, b_by_pattern: dict, rl: int) -> "CoefficientTable":
        """Same (a, b) per pattern across every STP index."""
        a = {}
        b = {}
        for pattern in PatternClass:
            for n in range(1, rl + 1):
                a[(pattern, n)] = a_by_pattern[pattern]
                b[(pattern, n)] = b_by_pattern[pattern]
        return cls(a=a, b=b)


def load_coefficients(stream) -> CoefficientTable:
    """Parse the `pattern,stp_index,a,b` coefficient file; hard-errors on
    any malformed row. Lines starting with '#' are comments."""
    if isinstance(stream, bytes):
        text = stream.decode("utf-8")
    elif isinstance(stream, str):
        text = stream
    else:
        data = stream.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data

    a: dict = {}
    b: dict = {}
    saw_header = False
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if not saw_header:
            if stripped != "pattern,stp_index,a,b":
                raise ConfigError(
                    f"line {line_no}: expected header 'pattern,stp_index,a,b'"
                )
            saw_header = True
            continue
        parts = stripped.split(",")
        if len(parts) != 4:
            raise ConfigError(f"line {line_no}: expected 4 fields, got {len(parts)}")
        pattern = _PATTERN_KEYS.get(parts[0].strip().lower())
        if pattern is None:
            raise ConfigError(f"line {line_no}: unknown pattern {parts[0]!r}")
        try:
            idx = int(parts[1])
            a_val = float(parts[2])
            b_val = float(parts[3])
        except ValueError as exc:
            raise ConfigError(f"line {line_no}: {exc}") from exc
        if idx < 1:
            raise ConfigError(f"line {line_no}: stp_index must be >= 1")
        if a_val < 0 or b_val < 0:
            raise ConfigError(f"line {line_no}: coefficients must be >= 0")
        key = (pattern, idx)
        if key in a:
            raise ConfigError(f"line {line_no}: duplicate entry for {parts[0]},{idx}")
        a[key] = a_val
        b[key] = b_val
    if not saw_header:
        raise ConfigError("coefficient file has no header row")
    if not a:
        raise ConfigError("coefficient file has no data rows")
    return CoefficientTable(a=a, b=b)


def dump_coefficients(table: CoefficientTable, comment: str = "") -> str:
    """Render a CoefficientTable back into the config file format."""
    buf = io.StringIO()
    if comment:
        for line in comment.splitlines():
            buf.write(f"# {line}\n")
    buf.write("pattern,stp_index,a,b\n")
    names = {v: k for k, v in _PATTERN_KEYS.items()}
    for (pattern, idx) in sorted(table.a, key=lambda k: (names[k[0]], k[1])):
        a_val = table.a[(pattern, idx)]
        b_val = table.b[(pattern, idx)]
        buf.write(f"{names[pattern]},{idx},{a_val:g},{b_val:g}\n")
    return buf.getvalue()


def default_coefficients() -> CoefficientTable:
    """Shipped engineering defaults (see data/coefficients.csv)."""
    data = resources.files("leakwatch").joinpath("data/coefficients.csv").read_bytes()
    return load_coefficients(data)


def c_coefficient(n: int, stp: StpVector = DEFAULT_STP) -> float:
    """Flat pseudo-zero ceiling for the n-th (1-based) STP length: 20(1+n)."""
    if not 1 <= n <= stp.resolution_level:
        raise IndexOutOfRange(f"stp index {n} outside 1..{stp.resolution_level}")
    return 20.0 * (1 + n)


def compute_md(
    window: DayWindow,
    pattern: PatternClass,
    stats: WindowStats,
    table: CoefficientTable,
    stp: StpVector = DEFAULT_STP,
    critical_table: CriticalValueTable = DEFAULT_TABLE,
) -> float:
    """Maximum deviation for one window of an STP length.

    Falls back to the flat ceiling when the critical value is pseudo-zero
    or cannot be computed yet (fewer than two observed days).
    """
    idx = stp.index_of(window.length)
    k = critical_value(stats, critical_table) if stats.n >= 2 else None
    if k is None or k <= PSEUDO_ZERO_K_LIMIT_L:
        return c_coefficient(idx, stp)
    a_val, b_val = table.lookup(pattern, idx)
    return a_val * k + b_val * stats.std


def compose_md(segments) -> float:
    """Length-weighted average of per-segment deviations (multi-pattern
    spans): sum over (T_m / T) * MD_m."""
    segments = list(segments)
    if not segments:
        raise EmptySegments("no segments to compose")
    if any(length <= 0 for length, _ in segments):
        raise ValueError("segment lengths must be positive")
    total = sum(length for length, _ in segments)
    return sum((length / total) * md for length, md in segments)


class Verdict(Enum):
    REAL_LEAK = "real"
    FALSE_ALERT = "false"


@dataclass(frozen=True)
class ReliabilityState:
    """Human-feedback counters: judged alerts, false alerts, real leaks."""

    an: int = 0
    fn: int = 0
    ln: int = 0

    def __post_init__(self):
        if self.an < 0 or self.fn < 0 or self.ln < 0:
            raise ValueError("negative feedback counter")
        if self.fn > self.an:
            raise ValueError(f"false-alert count {self.fn} exceeds alert count {self.an}")

    @property
    def r(self) -> float:
        """Model reliability: perfect (1) before any alert is judged; the
        all-false limit pins it at 0."""
        if self.an == 0:
            return 1.0
        if self.ln == 0:
            return 0.0
        return (self.an - self.fn) / self.ln


def update_reliability(state: ReliabilityState, verdict: Verdict) -> ReliabilityState:
    """Fold one judged alert into the counters."""
    return replace(
        state,
        an=state.an + 1,
        fn=state.fn + (1 if verdict is Verdict.FALSE_ALERT else 0),
        ln=state.ln + (1 if verdict is Verdict.REAL_LEAK else 0),
    )


def tune_md(
    md: float, state: ReliabilityState, learning: LearningState | None = None
) -> float:
    """Tuned maximum deviation TMD from the reliability coefficient.

    Applied per reported alert, after the primary learning period.
    """
    if learning is not None and learning.in_learning:
        raise LearningIncomplete("threshold tuning applies after the learning period")
    if md < 0:
        raise ValueError(f"negative deviation threshold: {md}")
    r = state.r
    if r > 0:
        return md / r
    if state.an > 0:
        return 0.5 * (state.an + 1.1) * md
    raise UndefinedTuning("r = 0 with no judged alerts cannot arise")
