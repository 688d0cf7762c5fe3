"""Finite alphabets over real-valued traffic measurements.

Symbol ``i`` covers the half-open interval ``[edge[i-1], edge[i])`` with
implicit outer edges at -inf/+inf, so the bins partition the real line.
A value equal to an edge goes to the right bin (left-closed convention).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateTrace, InvalidRange
from .trace import TrafficTrace


@dataclass(frozen=True)
class Alphabet:
    edges: tuple[float, ...]

    def __post_init__(self):
        if len(self.edges) < 1:
            raise ConfigError("alphabet needs at least one edge (K >= 2)")
        arr = np.asarray(self.edges, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ConfigError("alphabet edges must be finite")
        if np.any(np.diff(arr) <= 0):
            raise ConfigError("alphabet edges must be strictly increasing")

    @property
    def k(self) -> int:
        return len(self.edges) + 1

    def to_json_dict(self) -> dict:
        return {"edges": list(self.edges), "k": self.k}

    @classmethod
    def from_json_dict(cls, data: dict) -> "Alphabet":
        alphabet = cls(tuple(float(e) for e in data["edges"]))
        if "k" in data and int(data["k"]) != alphabet.k:
            raise ConfigError(f"alphabet k={data['k']} inconsistent with {len(data['edges'])} edges")
        return alphabet


def _values_of(source: TrafficTrace | np.ndarray) -> np.ndarray:
    if isinstance(source, TrafficTrace):
        return source.single_stream().values
    return np.asarray(source, dtype=float)


def build_quantile_alphabet(source: TrafficTrace | np.ndarray, k: int) -> Alphabet:
    """Alphabet whose edges are the j/k empirical quantiles of the data.

    Uses linear interpolation between order statistics (numpy's default
    quantile convention). Coinciding quantiles are deduplicated, which can
    return an alphabet smaller than requested; callers should check ``.k``.
    """
    if k < 2:
        raise ConfigError(f"alphabet size must be >= 2, got {k}")
    values = _values_of(source)
    if len(np.unique(values)) < 2:
        raise DegenerateTrace("fewer than 2 distinct values; cannot build an alphabet")
    edges = np.quantile(values, np.arange(1, k) / k)
    edges = np.unique(edges)
    return Alphabet(tuple(float(e) for e in edges))


def build_uniform_alphabet(lo: float, hi: float, k: int) -> Alphabet:
    """k-1 equally spaced edges strictly between lo and hi."""
    if not lo < hi:
        raise InvalidRange(f"need lo < hi, got [{lo}, {hi}]")
    if k < 2:
        raise InvalidRange(f"alphabet size must be >= 2, got {k}")
    edges = np.linspace(lo, hi, k + 1)[1:-1]
    return Alphabet(tuple(float(e) for e in edges))


def quantize(alphabet: Alphabet, value: float) -> int:
    """Symbol id of a single value. Total over all reals; ties go right."""
    return int(np.searchsorted(alphabet.edges, value, side="right"))


def quantize_values(alphabet: Alphabet, values: np.ndarray) -> np.ndarray:
    return np.searchsorted(alphabet.edges, np.asarray(values, dtype=float), side="right")


def quantize_series(alphabet: Alphabet, trace: TrafficTrace) -> np.ndarray:
    """Element-wise quantization of a single-stream trace, order preserved."""
    return quantize_values(alphabet, trace.single_stream().values)
