"""Model-free temporal detector.

Trains a smoothed reference PMF on bucket-aggregated anomaly-free traffic
and flags detection windows whose type diverges from it beyond the finite-n
method-of-types threshold
``eta = (K ln(n+1) + ln(1/beta)) / n``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    InsufficientTraining,
    InvalidBeta,
    TraceTooShort,
    WindowLengthMismatch,
)
from .measures import EmpiricalMeasure, floor_distribution, kl_divergence, type_of
from .quantize import Alphabet, build_quantile_alphabet
from .reports import Detector, WindowReport, make_report
from .trace import (
    FULL_DAY,
    Aggregation,
    BucketConfig,
    TimeOfDayInterval,
    TrafficTrace,
    Unit,
    aggregate_buckets,
    segment_by_time_of_day,
)
from .windowing import SymbolSeries, iter_windows, symbol_series

DEFAULT_K = 8
DEFAULT_WINDOW_N = 100
DEFAULT_EPSILON = 1e-4
MIN_BUCKETS_FACTOR = 10


@dataclass(frozen=True)
class TrainingSummary:
    """What training saw; the CLI prints this after ``train``."""

    requested_k: int
    effective_k: int
    training_count: int  # buckets (model-free) or raw samples (MMP)
    unseen_symbols: int
    uniform_rows: int = 0  # MMP only: states never left during training


@dataclass(frozen=True, eq=False)
class ModelFreeReference:
    """Frozen anomaly-free characterization for the model-free detector."""

    mu: EmpiricalMeasure
    alphabet: Alphabet
    bucket: BucketConfig
    window_n: int
    beta: float
    interval: TimeOfDayInterval
    unit: Unit

    def __post_init__(self):
        if self.mu.k != self.alphabet.k:
            raise ConfigError("mu support and alphabet size differ")
        if float(self.mu.probs.min()) <= 0:
            raise ConfigError("reference mu must be strictly positive (smoothed)")
        if self.window_n < 2:
            raise ConfigError("window_n must be >= 2")
        if not 0 < self.beta < 1:
            raise InvalidBeta(f"beta must lie in (0, 1), got {self.beta}")

    @property
    def k(self) -> int:
        return self.alphabet.k

    def threshold(self) -> float:
        return sanov_threshold(self.window_n, self.k, self.beta)

    def to_json_dict(self) -> dict:
        return {
            "alphabet": self.alphabet.to_json_dict(),
            "mu": [float(p) for p in self.mu.probs],
            "mu_sample_count": self.mu.sample_count,
            "bucket": {"length": self.bucket.bucket_length, "aggregation": self.bucket.aggregation.value},
            "window_n": self.window_n,
            "beta": self.beta,
            "interval": {
                "start_minute": self.interval.start_minute,
                "end_minute": self.interval.end_minute,
                "label": self.interval.label,
            },
            "unit": self.unit.value,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ModelFreeReference":
        return cls(
            mu=EmpiricalMeasure(np.asarray(data["mu"], dtype=float), int(data.get("mu_sample_count", 1))),
            alphabet=Alphabet.from_json_dict(data["alphabet"]),
            bucket=BucketConfig(int(data["bucket"]["length"]), Aggregation(data["bucket"]["aggregation"])),
            window_n=int(data["window_n"]),
            beta=float(data["beta"]),
            interval=TimeOfDayInterval(
                int(data["interval"]["start_minute"]),
                int(data["interval"]["end_minute"]),
                str(data["interval"].get("label", "")),
            ),
            unit=Unit(data["unit"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ModelFreeReference":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def sanov_threshold(n: int, k: int, beta: float) -> float:
    """Divergence threshold from the finite-n method-of-types bound.

    Solves (n+1)^K exp(-n eta) = beta, the types upper bound on
    P(D(type || mu) >= eta) for an n-sample window over K symbols.
    """
    if n < 1:
        raise ConfigError(f"window length must be >= 1, got {n}")
    if k < 2:
        raise ConfigError(f"alphabet size must be >= 2, got {k}")
    if not 0 < beta <= 1:
        raise InvalidBeta(f"beta must lie in (0, 1], got {beta}")
    return (k * math.log(n + 1) + math.log(1.0 / beta)) / n


def smoothed_type(symbols: np.ndarray, k: int, epsilon: float) -> EmpiricalMeasure:
    """Type of the training symbols with an epsilon floor and renormalization."""
    t = type_of(symbols, k)
    return EmpiricalMeasure(floor_distribution(t.probs, epsilon), t.sample_count)


def train_model_free(
    trace: TrafficTrace,
    k: int = DEFAULT_K,
    bucket: BucketConfig | None = None,
    window_n: int = DEFAULT_WINDOW_N,
    beta: float = 0.01,
    interval: TimeOfDayInterval = FULL_DAY,
    *,
    epsilon: float = DEFAULT_EPSILON,
    min_buckets_factor: int = MIN_BUCKETS_FACTOR,
    utc_offset_minutes: int = 0,
) -> tuple[ModelFreeReference, TrainingSummary]:
    """Build a reference PMF from an anomaly-free single-stream trace.

    The trace is restricted to ``interval``, bucket-aggregated, quantized on
    a fresh quantile alphabet, and its type is epsilon-floored so that
    symbols unseen in training give large finite statistics downstream.
    """
    if epsilon <= 0:
        raise ConfigError("epsilon must be positive: the reference must have full support")
    bucket = bucket or BucketConfig()
    segmented = segment_by_time_of_day(trace, interval, utc_offset_minutes=utc_offset_minutes)
    bucketed = aggregate_buckets(segmented, bucket)
    stream = bucketed.single_stream()
    if len(stream) < min_buckets_factor * k:
        raise InsufficientTraining(
            f"{len(stream)} buckets < required {min_buckets_factor * k} (= {min_buckets_factor} x K)"
        )
    alphabet = build_quantile_alphabet(stream.values, k)
    symbols = symbol_series(bucketed, alphabet).concatenated()
    raw_type = type_of(symbols, alphabet.k)
    unseen = int(np.count_nonzero(raw_type.probs == 0))
    mu = EmpiricalMeasure(floor_distribution(raw_type.probs, epsilon), raw_type.sample_count)
    ref = ModelFreeReference(mu, alphabet, bucket, window_n, beta, interval, trace.unit)
    summary = TrainingSummary(k, alphabet.k, len(stream), unseen)
    return ref, summary


def detect_window_mf(
    ref: ModelFreeReference,
    window: np.ndarray,
    window_start: int = 0,
    window_end: int | None = None,
) -> WindowReport:
    """Score one window of ``window_n`` bucket symbols against the reference."""
    window = np.asarray(window, dtype=np.int64)
    if len(window) != ref.window_n:
        raise WindowLengthMismatch(f"window has {len(window)} symbols, reference expects {ref.window_n}")
    statistic = kl_divergence(type_of(window, ref.k), ref.mu)
    if window_end is None:
        window_end = window_start + ref.window_n
    return make_report(window_start, window_end, Detector.MODEL_FREE, statistic, ref.threshold())


def detect_series_mf(
    mu: EmpiricalMeasure,
    series: SymbolSeries,
    window_n: int,
    beta: float,
    stride: int,
    detector: Detector = Detector.MODEL_FREE,
) -> list[WindowReport]:
    """Slide type-divergence windows over a symbol series (joint or temporal)."""
    eta = sanov_threshold(window_n, mu.k, beta)
    reports = [
        make_report(start, end, detector, kl_divergence(type_of(win, mu.k), mu), eta)
        for start, end, win in iter_windows(series, window_n, stride)
    ]
    if not reports:
        raise TraceTooShort(f"no segment holds a full window of {window_n} buckets")
    return sorted(reports, key=lambda r: r.window_start)


def detect_stream_mf(
    ref: ModelFreeReference,
    trace: TrafficTrace,
    stride: int | None = None,
    *,
    utc_offset_minutes: int = 0,
) -> list[WindowReport]:
    """Run the model-free detector over a live trace, one report per window."""
    if trace.unit != ref.unit:
        raise DataError(f"trace unit {trace.unit.value} differs from reference unit {ref.unit.value}")
    stride = stride if stride is not None else max(1, ref.window_n // 2)
    segmented = segment_by_time_of_day(trace, ref.interval, utc_offset_minutes=utc_offset_minutes)
    bucketed = aggregate_buckets(segmented, ref.bucket)
    series = symbol_series(bucketed, ref.alphabet)
    return detect_series_mf(ref.mu, series, ref.window_n, ref.beta, stride)
