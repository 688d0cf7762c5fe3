"""Spatio-temporal detection over groups of network elements.

Member streams are time-aligned into vectors, each dimension is quantized on
its own small alphabet, and the vector is folded into one symbol of the
product alphabet (mixed radix, dimension 0 least significant). Both temporal
detectors then run unchanged on the joint symbol sequence, so spatial and
temporal correlation are preserved in the statistic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    InsufficientTraining,
    JointAlphabetTooLarge,
    NoOverlap,
    StreamMismatch,
)
from .measures import floor_distribution, type_of
from .model_free import detect_series_mf, sanov_threshold, smoothed_type
from .mmp import _matrix_from_counts, detect_series_mmp, markov_threshold
from .quantize import Alphabet, build_quantile_alphabet, quantize_values
from .reports import Detector, WindowReport
from .trace import (
    FULL_DAY,
    Aggregation,
    BucketConfig,
    Role,
    TimeOfDayInterval,
    TrafficTrace,
    segment_by_time_of_day,
)
from .windowing import series_from_arrays

MAX_JOINT_ALPHABET = 4096
DEFAULT_PER_NODE_K = 3


@dataclass(frozen=True)
class SubnetSpec:
    """Which (node, role) streams form the monitored group."""

    members: tuple[tuple[str, Role], ...]
    per_node_k: int = DEFAULT_PER_NODE_K
    name: str = ""
    max_joint_size: int = MAX_JOINT_ALPHABET

    def __post_init__(self):
        if not self.members:
            raise ConfigError("subnet needs at least one member")
        if len(set(self.members)) != len(self.members):
            raise ConfigError("subnet members must be distinct")
        if self.per_node_k < 2:
            raise ConfigError("per_node_k must be >= 2")
        if self.per_node_k ** len(self.members) > self.max_joint_size:
            raise JointAlphabetTooLarge(
                f"{self.per_node_k}^{len(self.members)} exceeds the {self.max_joint_size}-symbol cap"
            )


@dataclass(frozen=True, eq=False)
class AlignedSeries:
    """Time-joined vector observations: values[t, d] for member d."""

    timestamps: np.ndarray  # int64
    values: np.ndarray  # (n, d) float64
    sample_period: int
    members: tuple[tuple[str, Role], ...]

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return len(self.timestamps)


def align_streams(traces: Sequence[TrafficTrace], tolerance: int = 0) -> AlignedSeries:
    """Join single-stream traces on timestamps agreeing within ``tolerance``.

    The first member anchors the grid; a vector is kept only when every
    member has a sample within ``tolerance`` seconds of the anchor time.
    Missing partners surface as gaps (segment breaks) downstream.
    """
    if not traces:
        raise ConfigError("need at least one stream to align")
    streams = [t.single_stream() for t in traces]
    periods = {t.sample_period for t in traces}
    if len(periods) != 1:
        raise StreamMismatch(f"members have differing sample periods: {sorted(periods)}")
    period = periods.pop()

    anchor = streams[0].timestamps
    cols = [streams[0].values]
    keep = np.ones(len(anchor), dtype=bool)
    for s in streams[1:]:
        idx = np.searchsorted(s.timestamps, anchor)
        best = np.full(len(anchor), -1, dtype=np.int64)
        gap = np.full(len(anchor), np.iinfo(np.int64).max, dtype=np.int64)
        for cand in (np.clip(idx - 1, 0, len(s.timestamps) - 1), np.clip(idx, 0, len(s.timestamps) - 1)):
            d = np.abs(s.timestamps[cand] - anchor)
            better = d < gap
            best[better] = cand[better]
            gap[better] = d[better]
        matched = gap <= tolerance
        keep &= matched
        col = np.zeros(len(anchor), dtype=float)
        col[matched] = s.values[best[matched]]
        cols.append(col)
    if not keep.any():
        raise NoOverlap("no timestamp is shared by all members within the tolerance")
    values = np.stack([c[keep] for c in cols], axis=1)
    members = tuple((t.single_stream().node_id, t.single_stream().role) for t in traces)
    return AlignedSeries(anchor[keep], values, period, members)


def joint_symbolize(vectors: np.ndarray, alphabets: Sequence[Alphabet]) -> np.ndarray:
    """Fold per-member symbols into product-alphabet ids (mixed radix).

    symbol = sum_d s_d * prod_{d' < d} K_{d'}; dimension 0 is least
    significant, so the map is a bijection onto 0..prod(K_d)-1.
    """
    vectors = np.asarray(vectors, dtype=float)
    if vectors.ndim != 2 or vectors.shape[1] != len(alphabets):
        raise DimensionMismatch(
            f"vectors have dimension {vectors.shape[1] if vectors.ndim == 2 else '?'}, "
            f"expected {len(alphabets)}"
        )
    joint = np.zeros(len(vectors), dtype=np.int64)
    radix = 1
    for d, alphabet in enumerate(alphabets):
        joint += quantize_values(alphabet, vectors[:, d]) * radix
        radix *= alphabet.k
    return joint


def joint_alphabet_size(alphabets: Sequence[Alphabet]) -> int:
    size = 1
    for a in alphabets:
        size *= a.k
    return size


def decode_joint_symbol(symbol: int, sizes: Sequence[int]) -> tuple[int, ...]:
    """Inverse of the mixed-radix fold, for round-trip checks and reporting."""
    out = []
    for k in sizes:
        out.append(int(symbol % k))
        symbol //= k
    if symbol != 0:
        raise DimensionMismatch("symbol exceeds the product alphabet size")
    return tuple(out)


@dataclass(frozen=True)
class SubnetDetectionConfig:
    """Detection parameters for a subnet run (see also the CLI config file)."""

    detector: Detector = Detector.MODEL_FREE
    window_n: int = 100
    beta: float = 0.01
    stride: int | None = None
    bucket: BucketConfig = field(default_factory=BucketConfig)
    tolerance: int = 0
    epsilon: float = 1e-4
    interval: TimeOfDayInterval = FULL_DAY
    min_windows_factor: int = 10


def _member_traces(trace: TrafficTrace, spec: SubnetSpec) -> list[TrafficTrace]:
    out = []
    for node, role in spec.members:
        try:
            out.append(trace.select(node, role))
        except KeyError:
            raise StreamMismatch(f"member ({node}, {role.value}) missing from trace") from None
    return out


def _bucket_aligned(aligned: AlignedSeries, bucket: BucketConfig) -> AlignedSeries:
    """Aggregate aligned vectors dimension-wise over buckets, respecting gaps."""
    length = bucket.bucket_length
    if length == 1:
        return aligned
    ts = aligned.timestamps
    breaks = np.flatnonzero(np.diff(ts) != aligned.sample_period)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks + 1, [len(ts)]))
    ts_parts, val_parts = [], []
    for a, b in zip(starts, ends):
        n_buckets = (b - a) // length
        if n_buckets == 0:
            continue
        block = aligned.values[a : a + n_buckets * length].reshape(n_buckets, length, -1)
        agg = block.sum(axis=1) if bucket.aggregation is Aggregation.SUM else block.mean(axis=1)
        ts_parts.append(ts[a : a + n_buckets * length : length])
        val_parts.append(agg)
    if not ts_parts:
        raise InsufficientTraining(f"no aligned segment yields a full bucket of {length} vectors")
    return AlignedSeries(
        np.concatenate(ts_parts),
        np.concatenate(val_parts, axis=0),
        aligned.sample_period * length,
        aligned.members,
    )


def _prepare(
    trace: TrafficTrace, spec: SubnetSpec, cfg: SubnetDetectionConfig, use_bucket: bool
) -> AlignedSeries:
    members = [
        segment_by_time_of_day(t, cfg.interval) for t in _member_traces(trace, spec)
    ] if cfg.interval != FULL_DAY else _member_traces(trace, spec)
    aligned = align_streams(members, cfg.tolerance)
    if use_bucket:
        aligned = _bucket_aligned(aligned, cfg.bucket)
    return aligned


def train_and_detect_subnet(
    spec: SubnetSpec,
    reference_trace: TrafficTrace,
    live_trace: TrafficTrace,
    cfg: SubnetDetectionConfig | None = None,
) -> list[WindowReport]:
    """Train on clean subnet traffic and scan live traffic for joint anomalies.

    Pipeline: align member streams, quantize each member on its own
    reference-trained alphabet, fold into the product alphabet, then run the
    chosen temporal detector over the joint symbol sequence.
    """
    cfg = cfg or SubnetDetectionConfig()
    use_bucket = cfg.detector is Detector.MODEL_FREE
    ref_aligned = _prepare(reference_trace, spec, cfg, use_bucket)
    alphabets = [
        build_quantile_alphabet(ref_aligned.values[:, d], spec.per_node_k)
        for d in range(ref_aligned.dimension)
    ]
    joint_k = joint_alphabet_size(alphabets)
    if joint_k > spec.max_joint_size:
        raise JointAlphabetTooLarge(f"joint alphabet of {joint_k} exceeds cap {spec.max_joint_size}")
    if len(ref_aligned) < cfg.min_windows_factor * joint_k:
        raise InsufficientTraining(
            f"{len(ref_aligned)} aligned training vectors < {cfg.min_windows_factor} x joint K = "
            f"{cfg.min_windows_factor * joint_k}"
        )

    ref_series = series_from_arrays(
        ref_aligned.timestamps,
        joint_symbolize(ref_aligned.values, alphabets),
        ref_aligned.sample_period,
    )
    live_aligned = _prepare(live_trace, spec, cfg, use_bucket)
    live_series = series_from_arrays(
        live_aligned.timestamps,
        joint_symbolize(live_aligned.values, alphabets),
        live_aligned.sample_period,
    )
    stride = cfg.stride if cfg.stride is not None else max(1, cfg.window_n // 2)

    if cfg.detector is Detector.MODEL_FREE:
        mu = smoothed_type(ref_series.concatenated(), joint_k, cfg.epsilon)
        return detect_series_mf(mu, live_series, cfg.window_n, cfg.beta, stride)
    if cfg.detector is Detector.MMP:
        counts = np.zeros((joint_k, joint_k), dtype=np.float64)
        for seg in ref_series.segments:
            if len(seg.symbols) >= 2:
                np.add.at(counts, (seg.symbols[:-1], seg.symbols[1:]), 1.0)
        p, _ = _matrix_from_counts(counts, joint_k, cfg.epsilon)
        return detect_series_mmp(p, live_series, cfg.window_n, cfg.beta, stride)
    raise ConfigError(f"subnet detection supports model_free or mmp, not {cfg.detector.value}")
