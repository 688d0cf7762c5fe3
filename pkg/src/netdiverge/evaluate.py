"""Scoring detector reports against ground truth, ROC sweeps, and a
mean-threshold contrast detector.

An episode (maximal labeled interval) counts as detected when at least one
flagged window overlaps it; the false-alarm rate is the fraction of clean
windows flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, EmptyGrid, SpanMismatch, TraceTooShort
from .reports import Detector, WindowReport, make_report
from .synth import Episode, LabelTrack
from .trace import (
    BucketConfig,
    FULL_DAY,
    TimeOfDayInterval,
    TrafficTrace,
    aggregate_buckets,
    segment_by_time_of_day,
)


@dataclass(frozen=True)
class Metrics:
    episodes_total: int
    episodes_detected: int
    detection_rate: float | None  # None when there are no episodes
    windows_total: int
    clean_windows: int
    false_alarms: int
    false_alarm_rate: float | None  # None when every window overlaps an episode
    mean_latency_seconds: float | None  # over detected episodes
    mean_latency_windows: float | None

    def to_json_dict(self) -> dict:
        return {
            "episodes_total": self.episodes_total,
            "episodes_detected": self.episodes_detected,
            "detection_rate": self.detection_rate,
            "windows_total": self.windows_total,
            "clean_windows": self.clean_windows,
            "false_alarms": self.false_alarms,
            "false_alarm_rate": self.false_alarm_rate,
            "mean_latency_seconds": self.mean_latency_seconds,
            "mean_latency_windows": self.mean_latency_windows,
        }

    def format_table(self) -> str:
        def fmt(x):
            return "n/a" if x is None else (f"{x:.4f}" if isinstance(x, float) else str(x))

        rows = [
            ("episodes detected", f"{self.episodes_detected}/{self.episodes_total}"),
            ("detection rate", fmt(self.detection_rate)),
            ("windows", str(self.windows_total)),
            ("clean windows", str(self.clean_windows)),
            ("false alarms", str(self.false_alarms)),
            ("false alarm rate", fmt(self.false_alarm_rate)),
            ("mean latency [s]", fmt(self.mean_latency_seconds)),
            ("mean latency [windows]", fmt(self.mean_latency_windows)),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


@dataclass(frozen=True)
class RocPoint:
    eta: float
    detection_rate: float | None
    false_alarm_rate: float | None


def _overlaps(start: int, end: int, ep: Episode) -> bool:
    return start < ep.end and ep.start < end


def _rates(
    reports: list[WindowReport], episodes: list[Episode], flagged: Sequence[bool]
) -> tuple[Metrics]:
    truly = [any(_overlaps(r.window_start, r.window_end, ep) for ep in episodes) for r in reports]
    clean = sum(1 for t in truly if not t)
    false_alarms = sum(1 for r, t, f in zip(reports, truly, flagged) if f and not t)

    detected = 0
    latencies_s: list[float] = []
    latencies_w: list[float] = []
    for ep in episodes:
        hits = [
            r
            for r, f in zip(reports, flagged)
            if f and _overlaps(r.window_start, r.window_end, ep)
        ]
        if hits:
            detected += 1
            first = min(hits, key=lambda r: r.window_start)
            latencies_s.append(float(first.window_start - ep.start))
            latencies_w.append(float(first.window_start - ep.start) / first.span)

    return Metrics(
        episodes_total=len(episodes),
        episodes_detected=detected,
        detection_rate=detected / len(episodes) if episodes else None,
        windows_total=len(reports),
        clean_windows=clean,
        false_alarms=false_alarms,
        false_alarm_rate=false_alarms / clean if clean else None,
        mean_latency_seconds=float(np.mean(latencies_s)) if latencies_s else None,
        mean_latency_windows=float(np.mean(latencies_w)) if latencies_w else None,
    )


def _check_span(reports: list[WindowReport], labels: LabelTrack) -> None:
    if not reports:
        raise DataError("no reports to score")
    r_lo = min(r.window_start for r in reports)
    r_hi = max(r.window_end for r in reports)
    l_lo, l_hi = labels.span()
    if r_hi <= l_lo or l_hi <= r_lo:
        raise SpanMismatch(
            f"reports span [{r_lo}, {r_hi}) but labels span [{l_lo}, {l_hi}); no common time range"
        )


def score(reports: Sequence[WindowReport], labels: LabelTrack) -> Metrics:
    """Episode detection rate, window false-alarm rate, and detection latency."""
    ordered = sorted(reports, key=lambda r: r.window_start)
    _check_span(ordered, labels)
    episodes = labels.episodes()
    return _rates(ordered, episodes, [r.is_anomaly for r in ordered])


def roc_sweep(
    reports: Sequence[WindowReport], labels: LabelTrack, etas: Sequence[float]
) -> list[RocPoint]:
    """Re-threshold the recorded statistics over an ascending eta grid.

    At eta equal to a report's own threshold this reproduces :func:`score`
    exactly, since flagging is ``statistic >= eta`` in both places.
    """
    if len(etas) == 0:
        raise EmptyGrid("eta grid is empty")
    grid = [float(e) for e in etas]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DataError("eta grid must be strictly ascending")
    ordered = sorted(reports, key=lambda r: r.window_start)
    _check_span(ordered, labels)
    episodes = labels.episodes()
    points = []
    for eta in grid:
        m = _rates(ordered, episodes, [r.statistic >= eta for r in ordered])
        points.append(RocPoint(eta, m.detection_rate, m.false_alarm_rate))
    return points


def mean_threshold_stream(
    reference_trace: TrafficTrace,
    live_trace: TrafficTrace,
    bucket: BucketConfig | None = None,
    window_n: int = 100,
    stride: int | None = None,
    z: float = 3.0,
    interval: TimeOfDayInterval = FULL_DAY,
) -> list[WindowReport]:
    """Contrast detector: flag windows whose mean shifts by z sigma.

    The statistic is |window mean - training mean| in units of the standard
    error of an n-sample mean under the training distribution. Sensitive to
    volume changes only; distribution shifts that preserve the mean slip by,
    which is exactly the contrast the divergence detectors are built for.
    """
    bucket = bucket or BucketConfig()
    ref_vals = aggregate_buckets(
        segment_by_time_of_day(reference_trace, interval), bucket
    ).single_stream().values
    m0 = float(ref_vals.mean())
    s0 = float(ref_vals.std(ddof=1))
    if s0 == 0:
        raise DataError("training values are constant; the mean baseline is undefined")
    stride = stride if stride is not None else max(1, window_n // 2)
    sem = s0 / math.sqrt(window_n)

    bucketed = aggregate_buckets(segment_by_time_of_day(live_trace, interval), bucket)
    stream = bucketed.single_stream()
    reports = []
    for sl in stream.segments(bucketed.sample_period):
        ts = stream.timestamps[sl]
        vals = stream.values[sl]
        for i in range(0, len(vals) - window_n + 1, stride):
            start = int(ts[i])
            end = int(ts[i + window_n - 1]) + bucketed.sample_period
            statistic = abs(float(vals[i : i + window_n].mean()) - m0) / sem
            reports.append(make_report(start, end, Detector.MEAN_BASELINE, statistic, z))
    if not reports:
        raise TraceTooShort(f"no segment holds a full window of {window_n} buckets")
    return sorted(reports, key=lambda r: r.window_start)
