"""Static integer frequency tables shared by both coders."""

from __future__ import annotations

import numpy as np

PRECISION_BITS = 16
MAX_TOTAL = 1 << PRECISION_BITS


def freq_table(counts, L: int | None = None) -> np.ndarray:
    """Add-one smoothed counts, rescaled so the total stays within 2**16.

    Every symbol gets frequency >= 1, so unseen symbols remain codable.
    Accepts either per-symbol counts or (with ``L``) a raw symbol stream.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if L is not None and len(counts) != L:
        counts = np.bincount(counts.ravel(), minlength=L)
    L = len(counts)
    if L < 1 or L > MAX_TOTAL - 1:
        raise ValueError(f"alphabet size {L} out of range")
    if (counts < 0).any():
        raise ValueError("negative counts")
    smoothed = counts + 1
    if smoothed.sum() <= MAX_TOTAL:
        return smoothed
    total = int(counts.sum())
    budget = MAX_TOTAL - L
    # python ints keep counts * budget exact for u32 counts
    return np.array([1 + (int(c) * budget) // total for c in counts], dtype=np.int64)


def cumulative(freqs: np.ndarray) -> list[int]:
    out = [0]
    for f in freqs:
        out.append(out[-1] + int(f))
    return out


def model_cross_entropy_bits(symbols, freqs) -> float:
    """Ideal code length of ``symbols`` (in bits) under the static table."""
    freqs = np.asarray(freqs, dtype=np.float64)
    symbols = np.asarray(symbols, dtype=np.int64)
    if symbols.size == 0:
        return 0.0
    return float(-np.log2(freqs[symbols] / freqs.sum()).sum())
