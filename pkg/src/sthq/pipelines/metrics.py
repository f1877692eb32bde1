"""Distortion metrics and the per-run metrics CSV."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

METRIC_FIELDS = ("run-id", "beta_total", "L", "dim", "bpp_or_bpw", "H_p_bits", "coded_bits",
                 "mse", "psnr_db", "accuracy")


def mse(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"mse: shapes {a.shape} and {b.shape} differ")
    return float(np.mean((a - b) ** 2))


def psnr(mse_value: float, max_value: float = 1.0) -> float:
    """10 log10(max^2 / mse) in dB; identical signals give +inf."""
    if mse_value < 0:
        raise ValueError("mse must be >= 0")
    if mse_value == 0:
        return math.inf
    return 10.0 * math.log10(max_value ** 2 / mse_value)


def accuracy(logits: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(np.argmax(logits, axis=1) == labels))


@dataclass
class RateDistortionPoint:
    run_id: str
    beta_total: float
    L: int
    dim: int
    rate: float  # bits per pixel or per weight
    entropy_bits: float  # same unit as rate
    coded_bits: int
    mse: float | None = None
    psnr_db: float | None = None
    accuracy: float | None = None

    def row(self) -> list[str]:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return "inf" if math.isinf(v) else repr(v)
            return str(v)

        return [fmt(v) for v in (self.run_id, float(self.beta_total), self.L, self.dim,
                                 float(self.rate), float(self.entropy_bits), self.coded_bits,
                                 self.mse, self.psnr_db, self.accuracy)]


def write_metrics(path, points: list[RateDistortionPoint]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRIC_FIELDS)
        for p in points:
            writer.writerow(p.row())


def read_metrics(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
