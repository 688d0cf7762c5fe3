"""Model-based detector using a Markov modulated process.

Because observation ranges of different states are disjoint (quantizer bins),
the state path is directly observable and the chain is estimated by counting
transitions; no hidden-state inference is required. Detection compares the
empirical pair measure of a window against the reference chain via the
Markov rate function, with threshold
``eta = (K^2 ln(n) + ln(1/beta)) / (n-1)``.
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
    SequenceTooShort,
    SymbolOutOfRange,
    TraceTooShort,
    WindowLengthMismatch,
)
from .measures import check_stochastic, floor_distribution, markov_rate, pair_measure_of
from .model_free import TrainingSummary
from .quantize import Alphabet, build_quantile_alphabet
from .reports import Detector, WindowReport, make_report
from .trace import FULL_DAY, TimeOfDayInterval, TrafficTrace, segment_by_time_of_day
from .windowing import SymbolSeries, iter_windows, symbol_series

DEFAULT_WINDOW_N = 500
DEFAULT_EPSILON = 1e-4
MIN_TRANSITIONS_FACTOR = 10


@dataclass(frozen=True, eq=False)
class MmpReference:
    """Frozen anomaly-free chain for the model-based detector."""

    transition: np.ndarray  # K x K, row-stochastic, strictly positive
    alphabet: Alphabet
    window_n: int
    beta: float
    interval: TimeOfDayInterval

    def __post_init__(self):
        p = check_stochastic(self.transition)
        object.__setattr__(self, "transition", p)
        if p.shape[0] != self.alphabet.k:
            raise ConfigError("transition matrix size and alphabet size differ")
        if float(p.min()) <= 0:
            raise ConfigError("reference transition matrix must be strictly positive (smoothed)")
        if self.window_n < 2:
            raise ConfigError("window_n must be >= 2")
        if not 0 < self.beta < 1:
            raise InvalidBeta(f"beta must lie in (0, 1), got {self.beta}")

    @property
    def k(self) -> int:
        return self.alphabet.k

    def threshold(self) -> float:
        return markov_threshold(self.window_n, self.k, self.beta)

    def to_json_dict(self) -> dict:
        return {
            "alphabet": self.alphabet.to_json_dict(),
            "P": [float(x) for x in self.transition.reshape(-1)],  # row-major
            "window_n": self.window_n,
            "beta": self.beta,
            "interval": {
                "start_minute": self.interval.start_minute,
                "end_minute": self.interval.end_minute,
                "label": self.interval.label,
            },
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "MmpReference":
        alphabet = Alphabet.from_json_dict(data["alphabet"])
        k = alphabet.k
        flat = np.asarray(data["P"], dtype=float)
        if flat.size != k * k:
            raise ConfigError(f"P has {flat.size} entries, expected {k * k}")
        return cls(
            transition=flat.reshape(k, k),
            alphabet=alphabet,
            window_n=int(data["window_n"]),
            beta=float(data["beta"]),
            interval=TimeOfDayInterval(
                int(data["interval"]["start_minute"]),
                int(data["interval"]["end_minute"]),
                str(data["interval"].get("label", "")),
            ),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "MmpReference":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def _matrix_from_counts(counts: np.ndarray, k: int, epsilon: float) -> tuple[np.ndarray, int]:
    """Row-normalize transition counts; unvisited states get uniform rows."""
    totals = counts.sum(axis=1)
    p = np.empty((k, k), dtype=float)
    uniform_rows = 0
    for i in range(k):
        if totals[i] == 0:
            p[i] = 1.0 / k
            uniform_rows += 1
        else:
            row = counts[i] / totals[i]
            p[i] = floor_distribution(row, epsilon) if epsilon > 0 else row
    return p, uniform_rows


def estimate_transition_matrix(seq, k: int, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Maximum-likelihood transition matrix with an epsilon floor per row.

    Rows of states never visited are set to the uniform distribution.
    ``epsilon=0`` gives the raw count ratios.
    """
    arr = np.asarray(seq, dtype=np.int64)
    if arr.size < 2:
        raise SequenceTooShort("need at least 2 symbols to estimate transitions")
    if arr.min() < 0 or arr.max() >= k:
        raise SymbolOutOfRange(f"symbols must lie in 0..{k - 1}")
    counts = np.zeros((k, k), dtype=np.float64)
    np.add.at(counts, (arr[:-1], arr[1:]), 1.0)
    p, _ = _matrix_from_counts(counts, k, epsilon)
    return p


def markov_threshold(n: int, k: int, beta: float) -> float:
    """Rate threshold from a pair-type counting bound over n-1 transitions.

    The polynomial factor n^(K^2) bounds the number of pair types; for the
    degenerate single-state alphabet no transition varies and the factor
    drops out.
    """
    if n < 2:
        raise ConfigError(f"window length must be >= 2, got {n}")
    if k < 1:
        raise ConfigError(f"alphabet size must be >= 1, got {k}")
    if not 0 < beta <= 1:
        raise InvalidBeta(f"beta must lie in (0, 1], got {beta}")
    poly = k * k * math.log(n) if k >= 2 else 0.0
    return (poly + math.log(1.0 / beta)) / (n - 1)


def train_mmp(
    trace: TrafficTrace,
    k: int = 8,
    window_n: int = DEFAULT_WINDOW_N,
    beta: float = 0.01,
    interval: TimeOfDayInterval = FULL_DAY,
    *,
    epsilon: float = DEFAULT_EPSILON,
    min_transitions_factor: int = MIN_TRANSITIONS_FACTOR,
    utc_offset_minutes: int = 0,
) -> tuple[MmpReference, TrainingSummary]:
    """Estimate the reference chain from raw (unbucketed) anomaly-free traffic.

    Transitions are counted inside contiguous segments only so that gaps do
    not fabricate transitions. Requires at least
    ``min_transitions_factor * k^2`` transitions (K^2 parameters to fit).
    """
    if epsilon <= 0:
        raise ConfigError("epsilon must be positive: the reference chain must have full support")
    segmented = segment_by_time_of_day(trace, interval, utc_offset_minutes=utc_offset_minutes)
    stream = segmented.single_stream()
    alphabet = build_quantile_alphabet(stream.values, k)
    series = symbol_series(segmented, alphabet)
    counts = np.zeros((alphabet.k, alphabet.k), dtype=np.float64)
    for seg in series.segments:
        if len(seg.symbols) >= 2:
            np.add.at(counts, (seg.symbols[:-1], seg.symbols[1:]), 1.0)
    n_transitions = int(counts.sum())
    needed = min_transitions_factor * alphabet.k * alphabet.k
    if n_transitions < needed:
        raise InsufficientTraining(f"{n_transitions} transitions < required {needed} (= {min_transitions_factor} x K^2)")
    p, uniform_rows = _matrix_from_counts(counts, alphabet.k, epsilon)
    unseen = int(np.count_nonzero(counts.sum(axis=1) + counts.sum(axis=0) == 0))
    ref = MmpReference(p, alphabet, window_n, beta, interval)
    summary = TrainingSummary(k, alphabet.k, len(stream), unseen, uniform_rows)
    return ref, summary


def detect_window_mmp(
    ref: MmpReference,
    window: np.ndarray,
    window_start: int = 0,
    window_end: int | None = None,
) -> WindowReport:
    """Score one window of raw-sample symbols against the reference chain."""
    window = np.asarray(window, dtype=np.int64)
    if len(window) != ref.window_n:
        raise WindowLengthMismatch(f"window has {len(window)} symbols, reference expects {ref.window_n}")
    statistic = markov_rate(pair_measure_of(window, ref.k), ref.transition)
    if window_end is None:
        window_end = window_start + ref.window_n
    return make_report(window_start, window_end, Detector.MMP, statistic, ref.threshold())


def detect_series_mmp(
    transition: np.ndarray,
    series: SymbolSeries,
    window_n: int,
    beta: float,
    stride: int,
) -> list[WindowReport]:
    """Slide Markov-rate windows over a symbol series (joint or temporal)."""
    p = check_stochastic(transition)
    eta = markov_threshold(window_n, p.shape[0], beta)
    reports = [
        make_report(start, end, Detector.MMP, markov_rate(pair_measure_of(win, p.shape[0]), p), eta)
        for start, end, win in iter_windows(series, window_n, stride)
    ]
    if not reports:
        raise TraceTooShort(f"no segment holds a full window of {window_n} samples")
    return sorted(reports, key=lambda r: r.window_start)


def detect_stream_mmp(
    ref: MmpReference,
    trace: TrafficTrace,
    stride: int | None = None,
    *,
    utc_offset_minutes: int = 0,
) -> list[WindowReport]:
    """Run the MMP detector over raw quantized samples, one report per window."""
    stride = stride if stride is not None else max(1, ref.window_n // 2)
    segmented = segment_by_time_of_day(trace, ref.interval, utc_offset_minutes=utc_offset_minutes)
    series = symbol_series(segmented, ref.alphabet)
    return detect_series_mmp(ref.transition, series, ref.window_n, ref.beta, stride)
