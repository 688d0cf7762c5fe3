"""Synthetic traces with known ground truth.

Sources are i.i.d. draws or a Markov modulated process with one emission
value per state (disjoint ranges), so ground-truth structure is exactly
recoverable after quantization. Anomaly injection produces a per-sample
label track alongside the modified trace.

All randomness comes from ``numpy.random.default_rng`` (PCG64), a named,
seedable, cross-platform-stable generator; the CLI records it in the trace
sidecar metadata.
"""

from __future__ import annotations

import csv
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    IntervalOutOfRange,
    InvalidPmf,
    MalformedRow,
    OverlappingAnomalies,
)
from .measures import check_stochastic
from .trace import Role, StreamSeries, TrafficTrace, Unit

RNG_NAME = "numpy-pcg64"


class AnomalyKind(str, Enum):
    VOLUME_SHIFT = "volume_shift"
    DISTRIBUTION_SHIFT = "distribution_shift"
    BURST = "burst"
    CORRELATION_FLIP = "correlation_flip"


@dataclass(frozen=True)
class AnomalySpec:
    """One labeled anomaly episode.

    ``node_id``/``role`` select the affected stream for the single-stream
    kinds; ``members`` lists the coupled streams for a correlation flip.
    """

    kind: AnomalyKind
    start: int
    end: int  # exclusive
    label_id: int
    node_id: str | None = None
    role: Role = Role.UNSPECIFIED
    members: tuple[tuple[str, Role], ...] | None = None
    factor: float | None = None  # volume_shift
    amount: float | None = None  # burst
    pmf: tuple[float, ...] | None = None  # distribution_shift: the law nu
    values: tuple[float, ...] | None = None  # distribution_shift: bin representatives

    def __post_init__(self):
        if self.start >= self.end:
            raise ConfigError(f"anomaly interval [{self.start}, {self.end}) is empty")
        if self.kind is AnomalyKind.CORRELATION_FLIP:
            if not self.members or len(self.members) < 2:
                raise ConfigError("correlation_flip needs at least 2 members")
        else:
            if self.node_id is None:
                raise ConfigError(f"{self.kind.value} needs a node_id")
        if self.kind is AnomalyKind.VOLUME_SHIFT and (self.factor is None or self.factor < 0):
            raise ConfigError("volume_shift needs a non-negative factor")
        if self.kind is AnomalyKind.BURST and self.amount is None:
            raise ConfigError("burst needs an amount")
        if self.kind is AnomalyKind.DISTRIBUTION_SHIFT:
            if self.pmf is None or self.values is None:
                raise ConfigError("distribution_shift needs pmf and values")
            if len(self.pmf) != len(self.values):
                raise DimensionMismatch("pmf and values lengths differ")

    def affected_streams(self) -> tuple[tuple[str, Role], ...]:
        if self.kind is AnomalyKind.CORRELATION_FLIP:
            assert self.members is not None
            return self.members
        assert self.node_id is not None
        return ((self.node_id, self.role),)


@dataclass(frozen=True, eq=False)
class LabelStream:
    node_id: str
    role: Role
    timestamps: np.ndarray  # int64, matches the trace stream
    flags: np.ndarray  # bool
    label_ids: np.ndarray  # int64, -1 where clean


@dataclass(frozen=True, eq=False)
class Episode:
    label_id: int
    start: int
    end: int  # exclusive


@dataclass(frozen=True, eq=False)
class LabelTrack:
    streams: tuple[LabelStream, ...]
    sample_period: int

    def span(self) -> tuple[int, int]:
        lo = min(int(s.timestamps[0]) for s in self.streams if len(s.timestamps))
        hi = max(int(s.timestamps[-1]) for s in self.streams if len(s.timestamps))
        return lo, hi + self.sample_period

    def episodes(self) -> list[Episode]:
        """Maximal labeled intervals, one per label id, in time order."""
        bounds: dict[int, tuple[int, int]] = {}
        for s in self.streams:
            marked = s.timestamps[s.flags]
            ids = s.label_ids[s.flags]
            for label in np.unique(ids):
                ts = marked[ids == label]
                lo, hi = int(ts.min()), int(ts.max()) + self.sample_period
                if int(label) in bounds:
                    plo, phi = bounds[int(label)]
                    lo, hi = min(lo, plo), max(hi, phi)
                bounds[int(label)] = (lo, hi)
        return [Episode(lid, lo, hi) for lid, (lo, hi) in sorted(bounds.items(), key=lambda kv: kv[1])]

    def bucketize(self, bucket_length: int) -> "LabelTrack":
        """Bucket-level labels: a bucket is anomalous iff any sample in it is."""
        out = []
        for s in self.streams:
            n_buckets = len(s.timestamps) // bucket_length
            if n_buckets == 0:
                continue
            cut = n_buckets * bucket_length
            flags = s.flags[:cut].reshape(n_buckets, bucket_length).any(axis=1)
            ids_block = s.label_ids[:cut].reshape(n_buckets, bucket_length)
            ids = ids_block.max(axis=1)  # -1 unless some sample is labeled
            out.append(LabelStream(s.node_id, s.role, s.timestamps[:cut:bucket_length], flags, ids))
        return LabelTrack(tuple(out), self.sample_period * bucket_length)


def _validate_pmf(pmf: np.ndarray) -> np.ndarray:
    pmf = np.asarray(pmf, dtype=float)
    if pmf.ndim != 1 or pmf.size == 0 or float(pmf.min()) < 0 or abs(float(pmf.sum()) - 1.0) > 1e-9:
        raise InvalidPmf("pmf must be non-negative and sum to 1")
    return pmf / pmf.sum()


def generate_iid(
    pmf: Sequence[float],
    values: Sequence[float],
    length: int,
    seed,
    *,
    node_id: str = "A",
    role: Role = Role.UNSPECIFIED,
    sample_period: int = 60,
    unit: Unit = Unit.BYTES,
    start_timestamp: int = 0,
) -> TrafficTrace:
    """I.i.d. draws over bin representative values; deterministic in the seed."""
    p = _validate_pmf(np.asarray(pmf))
    reps = np.asarray(values, dtype=float)
    if len(reps) != len(p):
        raise DimensionMismatch("pmf and values lengths differ")
    if length < 1:
        raise ConfigError("length must be positive")
    rng = np.random.default_rng(seed)
    bins = rng.choice(len(p), size=length, p=p)
    ts = start_timestamp + np.arange(length, dtype=np.int64) * sample_period
    return TrafficTrace((StreamSeries(node_id, role, ts, reps[bins]),), sample_period, unit)


def generate_mmp(
    transition: np.ndarray,
    values: Sequence[float],
    length: int,
    seed,
    initial_state: int = 0,
    *,
    node_id: str = "A",
    role: Role = Role.UNSPECIFIED,
    sample_period: int = 60,
    unit: Unit = Unit.BYTES,
    start_timestamp: int = 0,
) -> TrafficTrace:
    """Markov modulated trace: one representative emission value per state."""
    p = check_stochastic(transition)
    k = p.shape[0]
    reps = np.asarray(values, dtype=float)
    if len(reps) != k:
        raise DimensionMismatch(f"need one representative value per state, got {len(reps)} for K={k}")
    if not 0 <= initial_state < k:
        raise ConfigError(f"initial_state {initial_state} outside 0..{k - 1}")
    if length < 1:
        raise ConfigError("length must be positive")
    rng = np.random.default_rng(seed)
    uniforms = rng.random(length - 1).tolist()
    cum_rows = [row.tolist() for row in np.cumsum(p, axis=1)]
    states = np.empty(length, dtype=np.int64)
    state = initial_state
    states[0] = state
    last = k - 1
    for t in range(1, length):
        state = min(bisect_right(cum_rows[state], uniforms[t - 1]), last)
        states[t] = state
    ts = start_timestamp + np.arange(length, dtype=np.int64) * sample_period
    return TrafficTrace((StreamSeries(node_id, role, ts, reps[states]),), sample_period, unit)


def _blank_labels(trace: TrafficTrace) -> list[LabelStream]:
    return [
        LabelStream(
            s.node_id,
            s.role,
            s.timestamps,
            np.zeros(len(s), dtype=bool),
            np.full(len(s), -1, dtype=np.int64),
        )
        for s in trace.streams
    ]


def inject(trace: TrafficTrace, spec: AnomalySpec, seed) -> tuple[TrafficTrace, LabelTrack]:
    """Apply one anomaly and return the modified trace plus ground truth."""
    lo, hi = trace.span()
    if spec.start < lo or spec.end > hi:
        raise IntervalOutOfRange(f"[{spec.start}, {spec.end}) outside trace span [{lo}, {hi})")
    rng = np.random.default_rng(seed)
    affected = set(spec.affected_streams())

    new_streams: list[StreamSeries] = []
    label_streams: list[LabelStream] = []
    first_member = spec.affected_streams()[0]
    for s in trace.streams:
        flags = np.zeros(len(s), dtype=bool)
        ids = np.full(len(s), -1, dtype=np.int64)
        vals = s.values
        if (s.node_id, s.role) in affected:
            mask = (s.timestamps >= spec.start) & (s.timestamps < spec.end)
            if mask.any():
                vals = s.values.copy()
                if spec.kind is AnomalyKind.VOLUME_SHIFT:
                    vals[mask] *= spec.factor
                elif spec.kind is AnomalyKind.BURST:
                    # traffic counts stay non-negative even for a downward spike
                    vals[mask] = np.maximum(vals[mask] + spec.amount, 0.0)
                elif spec.kind is AnomalyKind.DISTRIBUTION_SHIFT:
                    nu = _validate_pmf(np.asarray(spec.pmf))
                    reps = np.asarray(spec.values, dtype=float)
                    vals[mask] = reps[rng.choice(len(nu), size=int(mask.sum()), p=nu)]
                elif spec.kind is AnomalyKind.CORRELATION_FLIP:
                    # first member keeps its timing; the others are shuffled
                    # within the interval, preserving each stream's multiset
                    if (s.node_id, s.role) != first_member:
                        idx = np.flatnonzero(mask)
                        vals[idx] = vals[idx[rng.permutation(len(idx))]]
                flags[mask] = True
                ids[mask] = spec.label_id
        new_streams.append(StreamSeries(s.node_id, s.role, s.timestamps, vals))
        label_streams.append(LabelStream(s.node_id, s.role, s.timestamps, flags, ids))
    modified = TrafficTrace(tuple(new_streams), trace.sample_period, trace.unit)
    return modified, LabelTrack(tuple(label_streams), trace.sample_period)


def apply_anomalies(
    trace: TrafficTrace, specs: Sequence[AnomalySpec], seed
) -> tuple[TrafficTrace, LabelTrack]:
    """Apply a list of anomalies; intervals may not overlap on a stream."""
    by_stream: dict[tuple[str, Role], list[tuple[int, int]]] = {}
    for spec in specs:
        for key in spec.affected_streams():
            for a, b in by_stream.get(key, []):
                if spec.start < b and a < spec.end:
                    raise OverlappingAnomalies(
                        f"intervals overlap on stream ({key[0]}, {key[1].value})"
                    )
            by_stream.setdefault(key, []).append((spec.start, spec.end))

    labels = _blank_labels(trace)
    current = trace
    for i, spec in enumerate(specs):
        current, track = inject(current, spec, np.random.SeedSequence([_as_int(seed), i]))
        for j, ls in enumerate(track.streams):
            merged_flags = labels[j].flags | ls.flags
            merged_ids = np.where(ls.flags, ls.label_ids, labels[j].label_ids)
            labels[j] = LabelStream(ls.node_id, ls.role, ls.timestamps, merged_flags, merged_ids)
    return current, LabelTrack(tuple(labels), trace.sample_period)


def _as_int(seed) -> int:
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    raise ConfigError(f"seed must be an integer, got {type(seed).__name__}")


def write_labels_csv(track: LabelTrack, path: str | Path) -> None:
    """Labels CSV: ``timestamp,node_id,is_anomaly,label_id`` for every sample."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp", "node_id", "is_anomaly", "label_id"])
        for s in sorted(track.streams, key=lambda s: (s.node_id, s.role.value)):
            for t, flag, lid in zip(s.timestamps, s.flags, s.label_ids):
                writer.writerow([int(t), s.node_id, "true" if flag else "false", int(lid) if flag else ""])


def read_labels_csv(path: str | Path, sample_period: int | None = None) -> LabelTrack:
    """Rebuild a label track from CSV; the period is inferred when not given."""
    rows: dict[str, list[tuple[int, bool, int]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            try:
                flag = row["is_anomaly"] == "true"
                lid = int(row["label_id"]) if flag and row["label_id"] != "" else -1
                rows.setdefault(row["node_id"], []).append((int(row["timestamp"]), flag, lid))
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedRow(lineno, f"bad label row: {exc}") from exc
    if not rows:
        raise MalformedRow(1, "label file has no rows")
    streams = []
    diffs = []
    for node, entries in sorted(rows.items()):
        entries.sort(key=lambda e: e[0])
        ts = np.array([e[0] for e in entries], dtype=np.int64)
        if len(ts) > 1:
            diffs.append(int(np.diff(ts).min()))
        streams.append(
            LabelStream(
                node,
                Role.UNSPECIFIED,
                ts,
                np.array([e[1] for e in entries], dtype=bool),
                np.array([e[2] for e in entries], dtype=np.int64),
            )
        )
    if sample_period is None:
        sample_period = min(diffs) if diffs else 1
    return LabelTrack(tuple(streams), sample_period)
