"""Empirical measures (types), pair measures, KL divergence, Markov rate.

All divergences are in nats. An infinite divergence (observed mass where the
reference puts none) is returned as ``math.inf`` rather than raised: an
unseen symbol or transition is a legitimate, maximally anomalous outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptySequence,
    NotStochastic,
    SequenceTooShort,
    SupportMismatch,
    SymbolOutOfRange,
)

_SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """PMF over K symbols.

    For the type of an n-sample every entry is a multiple of 1/n; smoothed
    reference laws relax that but keep the unit sum.
    """

    probs: np.ndarray
    sample_count: int

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1 or len(p) < 1:
            raise ValueError("probs must be a non-empty vector")
        if float(p.min(initial=0.0)) < 0:
            raise ValueError("probs must be non-negative")
        if abs(float(p.sum()) - 1.0) > _SUM_TOL:
            raise ValueError(f"probs sum to {p.sum()}, not 1")
        if self.sample_count < 1:
            raise ValueError("sample_count must be positive")

    @property
    def k(self) -> int:
        return len(self.probs)


@dataclass(frozen=True, eq=False)
class PairMeasure:
    """Joint PMF over consecutive symbol pairs; ``sample_count`` counts transitions."""

    probs: np.ndarray
    sample_count: int

    def __post_init__(self):
        q = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", q)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("pair measure must be a square matrix")
        if float(q.min(initial=0.0)) < 0:
            raise ValueError("pair measure must be non-negative")
        if abs(float(q.sum()) - 1.0) > _SUM_TOL:
            raise ValueError(f"pair measure sums to {q.sum()}, not 1")
        if self.sample_count < 1:
            raise ValueError("sample_count must be positive")
        # pair types of one sequence shift marginals by at most one count
        gap = np.abs(q.sum(axis=1) - q.sum(axis=0)).max()
        if gap > 1.0 / self.sample_count + _SUM_TOL:
            raise ValueError("row and column marginals differ by more than 1/n")

    @property
    def k(self) -> int:
        return self.probs.shape[0]

    def row_marginal(self) -> np.ndarray:
        return self.probs.sum(axis=1)


def _check_symbols(seq: np.ndarray, k: int) -> None:
    if seq.min(initial=0) < 0 or seq.max(initial=0) >= k:
        raise SymbolOutOfRange(f"symbols must lie in 0..{k - 1}")


def type_of(seq, k: int) -> EmpiricalMeasure:
    """Empirical measure (type) of a symbol sequence: probs[i] = count(i)/n."""
    arr = np.asarray(seq, dtype=np.int64)
    if arr.size == 0:
        raise EmptySequence("cannot take the type of an empty sequence")
    _check_symbols(arr, k)
    counts = np.bincount(arr, minlength=k)
    return EmpiricalMeasure(counts / arr.size, int(arr.size))


def pair_measure_of(seq, k: int) -> PairMeasure:
    """Empirical measure over consecutive pairs: probs[i,j] = count(i->j)/(n-1)."""
    arr = np.asarray(seq, dtype=np.int64)
    if arr.size < 2:
        raise SequenceTooShort("need at least 2 symbols for a pair measure")
    _check_symbols(arr, k)
    counts = np.zeros((k, k), dtype=np.float64)
    np.add.at(counts, (arr[:-1], arr[1:]), 1.0)
    return PairMeasure(counts / (arr.size - 1), int(arr.size - 1))


def kl_divergence(p: EmpiricalMeasure, q: EmpiricalMeasure) -> float:
    """D(p || q) = sum_i p_i ln(p_i / q_i) in nats.

    Terms with p_i = 0 contribute nothing; p_i > 0 where q_i = 0 yields inf.
    """
    if p.k != q.k:
        raise SupportMismatch(f"support sizes differ: {p.k} vs {q.k}")
    mask = p.probs > 0
    if np.any(q.probs[mask] == 0):
        return math.inf
    val = float(np.dot(p.probs[mask], np.log(p.probs[mask] / q.probs[mask])))
    return max(val, 0.0)


def check_stochastic(matrix: np.ndarray) -> np.ndarray:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"transition matrix must be square, got {m.shape}")
    if float(m.min(initial=0.0)) < 0:
        raise NotStochastic("transition matrix has negative entries")
    if np.abs(m.sum(axis=1) - 1.0).max() > _SUM_TOL:
        raise NotStochastic("transition matrix rows must sum to 1")
    return m


def markov_rate(pair: PairMeasure, transition: np.ndarray) -> float:
    """Large-deviations rate of a pair measure under a reference chain.

    With q(i) the row marginal and Qhat(j|i) = Q(i,j)/q(i) the empirical
    kernel, returns sum_{i,j} Q(i,j) ln( Qhat(j|i) / P(i,j) ), which equals
    sum_i q(i) D( Qhat(.|i) || P(i,.) ). Zero Q entries contribute nothing;
    mass on a transition with P(i,j) = 0 yields inf.
    """
    p = check_stochastic(transition)
    if p.shape != pair.probs.shape:
        raise DimensionMismatch(f"shape mismatch: pair {pair.probs.shape}, matrix {p.shape}")
    q_rows = pair.row_marginal()
    mask = pair.probs > 0
    if np.any(p[mask] == 0):
        return math.inf
    kernel = np.divide(
        pair.probs, q_rows[:, None], out=np.zeros_like(pair.probs), where=q_rows[:, None] > 0
    )
    val = float(np.sum(pair.probs[mask] * np.log(kernel[mask] / p[mask])))
    return max(val, 0.0)


def floor_distribution(probs: np.ndarray, epsilon: float) -> np.ndarray:
    """Raise every entry to at least ``epsilon`` and renormalize."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    floored = np.maximum(np.asarray(probs, dtype=float), epsilon)
    return floored / floored.sum()
