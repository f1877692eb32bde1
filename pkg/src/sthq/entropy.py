"""Symbol histograms and the entropy terms built on them (all in bits)."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .quantizer import soft_assign

PROB_FLOOR = 1e-9
_LN2 = np.log(2.0)


@dataclass
class HistogramPMF:
    probs: np.ndarray
    counts: np.ndarray | None = None

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 1 or (self.probs < 0).any():
            raise ValueError("probabilities must be a nonnegative vector")
        if abs(self.probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {self.probs.sum()!r}, not 1")

    @classmethod
    def from_counts(cls, counts) -> "HistogramPMF":
        counts = np.asarray(counts, dtype=np.float64)
        total = counts.sum()
        if total <= 0:
            raise ValueError("histogram has no mass")
        return cls(counts / total, counts)

    @property
    def L(self) -> int:
        return len(self.probs)


def _as_probs(p) -> np.ndarray:
    return p.probs if isinstance(p, HistogramPMF) else np.asarray(p, dtype=np.float64)


def symbol_counts(streams, L: int) -> np.ndarray:
    if isinstance(streams, np.ndarray) or not len(streams) or np.isscalar(streams[0]):
        streams = [np.asarray(streams)]
    else:
        streams = [np.asarray(s) for s in streams]
    counts = np.zeros(L, dtype=np.int64)
    for s in streams:
        if s.size and (s.min() < 0 or s.max() >= L):
            raise ValueError(f"symbols outside [0, {L})")
        counts += np.bincount(s.astype(np.int64).ravel(), minlength=L)
    return counts


def hard_histogram(streams, L: int) -> HistogramPMF:
    """p_j = occurrences of j / total symbol count, over one stream or many."""
    counts = symbol_counts(streams, L)
    if counts.sum() == 0:
        raise ValueError("hard_histogram: no symbols")
    return HistogramPMF.from_counts(counts)


def soft_histogram(columns, C, sigma) -> Tensor:
    """q_j = mean soft assignment to center j; differentiable in columns, C and sigma."""
    phi = soft_assign(columns, C, sigma)
    if phi.ndim == 1:
        return phi
    if phi.shape[0] == 0:
        raise ValueError("soft_histogram: no columns")
    return ad.mean(phi, axis=0)


def sample_entropy(p) -> float:
    probs = _as_probs(p)
    nz = probs[probs > 0]
    return float(max(-(nz * np.log2(nz)).sum(), 0.0))


def kl_divergence(p, q) -> float:
    p, q = _as_probs(p), _as_probs(q)
    mask = p > 0
    if (q[mask] <= 0).any():
        return float("inf")
    return float((p[mask] * np.log2(p[mask] / q[mask])).sum())


def cross_entropy_pq(p, q) -> float:
    """H(p, q) = -sum p_j log2 q_j; infinite cross entropy is an error."""
    p, q = _as_probs(p), _as_probs(q)
    mask = p > 0
    if (q[mask] <= 0).any():
        raise ValueError("cross entropy is infinite: q_j = 0 where p_j > 0")
    return float(-(p[mask] * np.log2(q[mask])).sum())


def soft_cross_entropy_pq(columns, C, sigma, p) -> Tensor:
    """Differentiable H(p, q) with q the soft histogram and p held constant."""
    probs = _as_probs(p)
    q = soft_histogram(columns, C, sigma)
    mask = probs > 0
    logq = ad.log(ad.getitem(q, mask))
    return ad.neg(ad.sum_(logq * probs[mask])) / _LN2


def soft_cross_entropy_qp(columns, C, sigma, p) -> Tensor:
    """Differentiable H(q, p) = -(1/M) sum_l sum_j phi_j(z_l) log2 p_j.

    ``p`` is a constant; entries are floored at ``PROB_FLOOR`` inside the log
    so unused centers keep finite gradients.
    """
    return assignment_cross_entropy(soft_assign(columns, C, sigma), p)


def assignment_cross_entropy(phi: Tensor, p) -> Tensor:
    """H(q, p) from precomputed soft assignments (rows of ``phi``)."""
    probs = np.maximum(_as_probs(p), PROB_FLOOR)
    code_lengths = -np.log2(probs)
    if phi.ndim == 1:
        return ad.sum_(phi * code_lengths)
    return ad.mean(ad.matmul(phi, Tensor(code_lengths[:, None])))


def joint_entropy_estimate(p, m: int) -> float:
    """m * H(p): entropy of m i.i.d. symbols drawn from p."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return m * sample_entropy(p)


class RunningHistogram:
    """Ring buffer of per-item symbol counts with a periodically refreshed PMF.

    Every call to :meth:`update` is one training iteration.  The PMF is
    recomputed from the buffered counts on the first update and then every
    ``interval`` updates; in between it is left untouched.
    """

    def __init__(self, L: int, capacity: int, interval: int = 10):
        if capacity <= 0 or interval <= 0:
            raise ValueError("capacity and interval must be positive")
        self.L = L
        self.capacity = capacity
        self.interval = interval
        self.items: deque[np.ndarray] = deque(maxlen=capacity)
        self.iteration = 0
        self.pmf: HistogramPMF | None = None

    def update(self, streams) -> HistogramPMF:
        for s in streams:
            self.items.append(symbol_counts(np.asarray(s).ravel(), self.L))
        if self.pmf is None or self.iteration % self.interval == 0:
            self.recompute()
        self.iteration += 1
        return self.pmf

    def recompute(self) -> HistogramPMF:
        counts = np.sum(list(self.items), axis=0)
        self.pmf = HistogramPMF.from_counts(counts)
        return self.pmf

    @property
    def counts(self) -> np.ndarray:
        return np.sum(list(self.items), axis=0).astype(np.int64)


def running_histogram_update(state: RunningHistogram, streams) -> RunningHistogram:
    state.update(streams)
    return state
