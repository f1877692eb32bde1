"""Hardness schedules that move the soft assignment towards hard quantization."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

SIGMA_FLOOR = 1e-4

TELEMETRY_FIELDS = ("t", "sigma", "e_soft", "e_hard", "gap", "target_gap", "entropy_bits")


@dataclass(frozen=True)
class AnnealState:
    sigma: float
    t: int = 0
    mode: str = "exponential"  # "gap" or "exponential"
    gap0: float | None = None
    T: float = 2000.0
    K_G: float = 100.0
    growth: float = 1.001
    sigma0: float | None = None

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma!r}")
        if self.mode == "gap":
            if self.T <= 0:
                raise ValueError("gap mode needs T > 0")
        elif self.mode == "exponential":
            if not self.growth > 1:
                raise ValueError("exponential mode needs growth > 1")
        else:
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.sigma0 is None:
            object.__setattr__(self, "sigma0", self.sigma)


def gap(e_soft: float, e_hard: float) -> float:
    """Hard minus soft quantization error."""
    return e_hard - e_soft


def target_gap(state: AnnealState, t: int | None = None) -> float:
    """Desired gap T/(T+t) * gap(0): halves after T iterations."""
    if state.gap0 is None:
        raise ValueError("gap(0) has not been recorded")
    t = state.t if t is None else t
    return state.T / (state.T + t) * state.gap0


def start_gap_schedule(state: AnnealState, gap0: float) -> AnnealState:
    return replace(state, gap0=float(gap0), t=0)


def gap_feedback_step(state: AnnealState, gap_t: float) -> AnnealState:
    """sigma <- sigma + K_G * (gap(t) - target(t)), floored at SIGMA_FLOOR."""
    if state.mode != "gap":
        raise ValueError("gap_feedback_step requires a gap-mode schedule")
    error = gap_t - target_gap(state)
    sigma = max(state.sigma + state.K_G * error, SIGMA_FLOOR)
    return replace(state, sigma=sigma, t=state.t + 1)


def exponential_step(state: AnnealState) -> AnnealState:
    if state.mode != "exponential":
        raise ValueError("exponential_step requires an exponential-mode schedule")
    return replace(state, sigma=state.sigma * state.growth, t=state.t + 1)


def step(state: AnnealState, gap_t: float | None = None) -> AnnealState:
    if state.mode == "gap":
        return gap_feedback_step(state, gap_t)
    return exponential_step(state)


@dataclass(frozen=True)
class HardSwitchPolicy:
    """When to stop annealing and fine-tune with hard assignments.

    kind: "never", "sigma" (sigma >= threshold) or "factor" (sigma >= factor * sigma0).
    """

    kind: str = "factor"
    value: float = 20.0

    def __post_init__(self):
        if self.kind not in ("never", "sigma", "factor"):
            raise ValueError(f"unknown hard-switch policy {self.kind!r}")


def hard_switch_reached(state: AnnealState, policy: HardSwitchPolicy) -> bool:
    if policy.kind == "never":
        return False
    if policy.kind == "sigma":
        return state.sigma >= policy.value
    # relative slack absorbs float rounding in repeated multiplication
    return state.sigma >= policy.value * state.sigma0 * (1 - 1e-12)


def steps_to_factor(growth: float, factor: float) -> int:
    """Smallest t with growth**t >= factor."""
    return math.ceil(math.log(factor) / math.log(growth))


class TelemetryWriter:
    """Per-iteration CSV of the annealing diagnostics."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(TELEMETRY_FIELDS)

    def write(self, t, sigma, e_soft, e_hard, gap_value, target, entropy_bits) -> None:
        row = [t, sigma, e_soft, e_hard, gap_value, target, entropy_bits]
        self._writer.writerow([v if isinstance(v, (int, str)) else repr(float(v)) for v in row])

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
