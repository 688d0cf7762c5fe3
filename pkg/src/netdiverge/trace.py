"""Traffic trace data model: CSV ingestion, time-of-day segmentation, bucketing.

A trace holds one or more per-(node, role) streams of equally spaced,
non-negative traffic counts. Gaps in a stream are kept explicit: any jump in
timestamps larger than the sample period starts a new contiguous segment, and
downstream transforms (bucketing, windowing) never cross a segment boundary.

Trace files are plain CSV with header ``timestamp,node_id,role,value``.
``sample_period`` and ``unit`` come from an optional JSON sidecar
(``<file>.meta.json``) or from explicit arguments.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .errors import (
    ConfigError,
    EmptyFile,
    EmptySegment,
    MalformedRow,
    NegativeValue,
    TraceTooShort,
)

_NODE_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")

_CANONICAL_COLUMNS = ("timestamp", "node_id", "role", "value")


class Role(str, Enum):
    ORIGIN = "origin"
    DESTINATION = "destination"
    UNSPECIFIED = "unspecified"


class Unit(str, Enum):
    BITS = "bits"
    BYTES = "bytes"
    PACKETS = "packets"
    FLOWS = "flows"


class Aggregation(str, Enum):
    SUM = "sum"
    MEAN = "mean"


@dataclass(frozen=True)
class TraceSample:
    """One measurement: traffic volume at a node during one sampling interval."""

    timestamp: int
    node_id: str
    role: Role
    value: float


@dataclass(frozen=True)
class TimeOfDayInterval:
    """Half-open minute-of-day interval, optionally wrapping midnight.

    ``start_minute`` is inclusive, ``end_minute`` exclusive. The interval
    wraps midnight when ``start_minute > end_minute``.
    """

    start_minute: int
    end_minute: int
    label: str = ""

    def __post_init__(self):
        if not 0 <= self.start_minute < 1440:
            raise ConfigError(f"start_minute {self.start_minute} outside 0..1439")
        if not 0 < self.end_minute <= 1440:
            raise ConfigError(f"end_minute {self.end_minute} outside 1..1440")
        if self.start_minute == self.end_minute:
            raise ConfigError("empty time-of-day interval")

    @property
    def wraps(self) -> bool:
        return self.start_minute > self.end_minute

    @property
    def minutes_per_day(self) -> int:
        if self.wraps:
            return (1440 - self.start_minute) + self.end_minute
        return self.end_minute - self.start_minute

    def contains_minute(self, minute_of_day: int) -> bool:
        if self.wraps:
            return minute_of_day >= self.start_minute or minute_of_day < self.end_minute
        return self.start_minute <= minute_of_day < self.end_minute


FULL_DAY = TimeOfDayInterval(0, 1440, "all-day")


@dataclass(frozen=True)
class BucketConfig:
    """How many raw samples form one time bucket and how they are combined."""

    bucket_length: int = 1
    aggregation: Aggregation = Aggregation.SUM

    def __post_init__(self):
        if self.bucket_length < 1:
            raise ConfigError(f"bucket_length must be >= 1, got {self.bucket_length}")


@dataclass(frozen=True, eq=False)
class StreamSeries:
    """All samples of one (node_id, role) stream, sorted by timestamp."""

    node_id: str
    role: Role
    timestamps: np.ndarray  # int64, strictly increasing
    values: np.ndarray  # float64, non-negative

    def __post_init__(self):
        if len(self.timestamps) != len(self.values):
            raise ValueError("timestamps and values length mismatch")
        if len(self.timestamps) and np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if len(self.values) and float(self.values.min()) < 0:
            raise NegativeValue(f"negative value in stream ({self.node_id}, {self.role.value})")

    def __len__(self) -> int:
        return len(self.timestamps)

    def segments(self, sample_period: int) -> list[slice]:
        """Contiguous runs; a gap is any timestamp jump other than one period."""
        if len(self) == 0:
            return []
        breaks = np.flatnonzero(np.diff(self.timestamps) != sample_period)
        starts = np.concatenate(([0], breaks + 1))
        ends = np.concatenate((breaks + 1, [len(self)]))
        return [slice(int(a), int(b)) for a, b in zip(starts, ends)]


@dataclass(frozen=True, eq=False)
class TrafficTrace:
    """Immutable collection of streams sharing one sample period and unit."""

    streams: tuple[StreamSeries, ...]
    sample_period: int
    unit: Unit

    def __post_init__(self):
        if self.sample_period < 1:
            raise ConfigError(f"sample_period must be >= 1, got {self.sample_period}")
        keys = [(s.node_id, s.role) for s in self.streams]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (node_id, role) stream")

    @property
    def n_samples(self) -> int:
        return sum(len(s) for s in self.streams)

    def stream_keys(self) -> list[tuple[str, Role]]:
        return [(s.node_id, s.role) for s in self.streams]

    def stream(self, node_id: str, role: Role) -> StreamSeries:
        for s in self.streams:
            if s.node_id == node_id and s.role == role:
                return s
        raise KeyError(f"no stream ({node_id}, {role.value})")

    def single_stream(self) -> StreamSeries:
        """The only stream of the trace; raises if the trace holds several."""
        if len(self.streams) != 1:
            keys = ", ".join(f"{n}:{r.value}" for n, r in self.stream_keys())
            raise ConfigError(f"expected a single stream, trace has [{keys}]")
        return self.streams[0]

    def select(self, node_id: str, role: Role) -> "TrafficTrace":
        return TrafficTrace((self.stream(node_id, role),), self.sample_period, self.unit)

    def iter_samples(self) -> Iterator[TraceSample]:
        for s in self.streams:
            for t, v in zip(s.timestamps, s.values):
                yield TraceSample(int(t), s.node_id, s.role, float(v))

    def span(self) -> tuple[int, int]:
        """(first timestamp, last timestamp + period) over all streams."""
        if self.n_samples == 0:
            raise EmptyFile("trace has no samples")
        lo = min(int(s.timestamps[0]) for s in self.streams if len(s))
        hi = max(int(s.timestamps[-1]) for s in self.streams if len(s))
        return lo, hi + self.sample_period


def _sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".meta.json")


def read_sidecar(path: str | Path) -> dict:
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        return json.loads(sidecar.read_text())
    return {}


def write_sidecar(path: str | Path, metadata: Mapping) -> None:
    _sidecar_path(path).write_text(json.dumps(dict(metadata), indent=2) + "\n")


def load_trace(
    path: str | Path,
    *,
    sample_period: int | None = None,
    unit: Unit | str | None = None,
    schema: Mapping[str, str] | None = None,
) -> TrafficTrace:
    """Parse a trace CSV into a :class:`TrafficTrace`.

    ``schema`` maps the canonical column names (timestamp, node_id, role,
    value) to the file's actual header names when they differ. Period and
    unit fall back to the ``<path>.meta.json`` sidecar when not given.
    """
    meta = read_sidecar(path)
    if sample_period is None:
        sample_period = meta.get("sample_period")
    if unit is None:
        unit = meta.get("unit")
    if sample_period is None:
        raise ConfigError(f"{path}: sample_period not given and no sidecar found")
    if unit is None:
        raise ConfigError(f"{path}: unit not given and no sidecar found")
    unit = Unit(unit)
    sample_period = int(sample_period)

    columns = dict(zip(_CANONICAL_COLUMNS, _CANONICAL_COLUMNS))
    if schema:
        columns.update(schema)

    rows: dict[tuple[str, Role], list[tuple[int, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyFile(f"{path}: empty file")
        missing = [c for c in columns.values() if c not in reader.fieldnames]
        if missing:
            raise MalformedRow(1, f"missing column(s) {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                ts = int(row[columns["timestamp"]])
                node = row[columns["node_id"]]
                role_raw = row[columns["role"]]
                value = float(row[columns["value"]])
            except (TypeError, ValueError, KeyError) as exc:
                raise MalformedRow(lineno, f"unparseable row: {exc}") from exc
            if not _NODE_ID_RE.match(node or ""):
                raise MalformedRow(lineno, f"invalid node_id {node!r}")
            try:
                role = Role(role_raw)
            except ValueError:
                raise MalformedRow(lineno, f"invalid role {role_raw!r}") from None
            if value < 0:
                raise NegativeValue(f"line {lineno}: negative value {value}")
            rows.setdefault((node, role), []).append((ts, value))

    if not rows:
        raise EmptyFile(f"{path}: no data rows")

    streams = []
    for (node, role), pairs in sorted(rows.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        pairs.sort(key=lambda p: p[0])
        ts = np.array([p[0] for p in pairs], dtype=np.int64)
        diffs = np.diff(ts)
        if np.any(diffs == 0):
            dup = int(ts[np.flatnonzero(diffs == 0)[0]])
            raise MalformedRow(0, f"duplicate sample ({node}, {role.value}, {dup})")
        if np.any(diffs < sample_period):
            bad = int(ts[np.flatnonzero(diffs < sample_period)[0] + 1])
            raise MalformedRow(
                0, f"({node}, {role.value}) spacing below sample_period near t={bad}"
            )
        vals = np.array([p[1] for p in pairs], dtype=np.float64)
        streams.append(StreamSeries(node, role, ts, vals))
    return TrafficTrace(tuple(streams), sample_period, unit)


def write_trace(
    trace: TrafficTrace, path: str | Path, *, extra_metadata: Mapping | None = None
) -> None:
    """Write trace CSV plus the metadata sidecar (period, unit, extras)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CANONICAL_COLUMNS)
        for s in sorted(trace.streams, key=lambda s: (s.node_id, s.role.value)):
            for t, v in zip(s.timestamps, s.values):
                writer.writerow([int(t), s.node_id, s.role.value, repr(float(v))])
    meta = {"sample_period": trace.sample_period, "unit": trace.unit.value}
    if extra_metadata:
        meta.update(extra_metadata)
    write_sidecar(path, meta)


def segment_by_time_of_day(
    trace: TrafficTrace,
    interval: TimeOfDayInterval,
    *,
    utc_offset_minutes: int = 0,
) -> TrafficTrace:
    """Keep only samples whose minute-of-day falls inside ``interval``.

    Minutes are computed in UTC plus a fixed configured offset. Day
    boundaries surface as ordinary segment breaks in the result.
    """
    if trace.n_samples == 0:
        raise EmptyFile("cannot segment an empty trace")
    kept = []
    for s in trace.streams:
        minute = ((s.timestamps // 60) + utc_offset_minutes) % 1440
        if interval.wraps:
            mask = (minute >= interval.start_minute) | (minute < interval.end_minute)
        else:
            mask = (minute >= interval.start_minute) & (minute < interval.end_minute)
        if mask.any():
            kept.append(StreamSeries(s.node_id, s.role, s.timestamps[mask], s.values[mask]))
    if not kept:
        raise EmptySegment(f"no sample falls inside minutes [{interval.start_minute}, {interval.end_minute})")
    return TrafficTrace(tuple(kept), trace.sample_period, trace.unit)


def aggregate_buckets(trace: TrafficTrace, cfg: BucketConfig) -> TrafficTrace:
    """Aggregate each stream into buckets of ``bucket_length`` samples.

    Buckets never span a gap; a trailing partial bucket in each contiguous
    segment is discarded. Bucket timestamps are the first raw timestamp of
    the bucket, and the output period is ``bucket_length * sample_period``.
    """
    length = cfg.bucket_length
    out_streams = []
    for s in trace.streams:
        ts_parts, val_parts = [], []
        for seg in s.segments(trace.sample_period):
            seg_ts = s.timestamps[seg]
            seg_vals = s.values[seg]
            n_buckets = len(seg_vals) // length
            if n_buckets == 0:
                continue
            block = seg_vals[: n_buckets * length].reshape(n_buckets, length)
            agg = block.sum(axis=1) if cfg.aggregation is Aggregation.SUM else block.mean(axis=1)
            ts_parts.append(seg_ts[: n_buckets * length : length])
            val_parts.append(agg)
        if ts_parts:
            out_streams.append(
                StreamSeries(s.node_id, s.role, np.concatenate(ts_parts), np.concatenate(val_parts))
            )
    if not out_streams:
        raise TraceTooShort(f"no segment yields a full bucket of {length} samples")
    return TrafficTrace(tuple(out_streams), trace.sample_period * length, trace.unit)
