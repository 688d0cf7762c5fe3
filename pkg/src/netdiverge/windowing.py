"""Sliding symbol windows over quantized traces.

Internal plumbing shared by both detectors and the spatio-temporal path.
Windows never cross a segment break.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .quantize import Alphabet, quantize_values
from .trace import TrafficTrace


@dataclass(frozen=True, eq=False)
class SymbolSegment:
    timestamps: np.ndarray  # int64, contiguous at the series period
    symbols: np.ndarray  # int64


@dataclass(frozen=True, eq=False)
class SymbolSeries:
    segments: tuple[SymbolSegment, ...]
    sample_period: int

    @property
    def n_symbols(self) -> int:
        return sum(len(s.symbols) for s in self.segments)

    def concatenated(self) -> np.ndarray:
        if not self.segments:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([s.symbols for s in self.segments])


def symbol_series(trace: TrafficTrace, alphabet: Alphabet) -> SymbolSeries:
    """Quantize a single-stream trace, splitting at gaps."""
    stream = trace.single_stream()
    segs = []
    for sl in stream.segments(trace.sample_period):
        segs.append(
            SymbolSegment(stream.timestamps[sl], quantize_values(alphabet, stream.values[sl]))
        )
    return SymbolSeries(tuple(segs), trace.sample_period)


def series_from_arrays(timestamps: np.ndarray, symbols: np.ndarray, period: int) -> SymbolSeries:
    """Build a series from parallel arrays, splitting where spacing != period."""
    ts = np.asarray(timestamps, dtype=np.int64)
    sym = np.asarray(symbols, dtype=np.int64)
    if len(ts) == 0:
        return SymbolSeries((), period)
    breaks = np.flatnonzero(np.diff(ts) != period)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks + 1, [len(ts)]))
    segs = tuple(SymbolSegment(ts[a:b], sym[a:b]) for a, b in zip(starts, ends))
    return SymbolSeries(segs, period)


def iter_windows(
    series: SymbolSeries, window_n: int, stride: int
) -> Iterator[tuple[int, int, np.ndarray]]:
    """Yield (start_ts, end_ts_exclusive, symbols) for each sliding window."""
    if window_n < 1 or stride < 1:
        raise ValueError("window_n and stride must be positive")
    for seg in series.segments:
        for i in range(0, len(seg.symbols) - window_n + 1, stride):
            start = int(seg.timestamps[i])
            end = int(seg.timestamps[i + window_n - 1]) + series.sample_period
            yield start, end, seg.symbols[i : i + window_n]
