"""The rate-distortion training objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import NonFiniteError, Tensor
from ..entropy import assignment_cross_entropy, soft_cross_entropy_qp


class TrainingDiverged(RuntimeError):
    """The loss or a gradient became non-finite."""


@dataclass(frozen=True)
class RDObjectiveConfig:
    """beta_total multiplies the summed per-symbol soft entropies (it already includes m)."""

    beta_total: float = 0.0
    lam: float = 0.0
    loss_kind: str = "mse"

    def __post_init__(self):
        if self.beta_total < 0 or self.lam < 0:
            raise ValueError("beta_total and lambda must be >= 0")
        if self.loss_kind not in ("mse", "cross-entropy"):
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")


@dataclass
class RateTerm:
    """Columns (M, dim) of one histogram group, the shared centers and its current PMF.

    ``assignments`` may carry the soft assignments already computed for the
    forward pass, which saves evaluating them twice.
    """

    columns: Tensor
    centers: object
    pmf: object
    assignments: Tensor | None = None


def sample_loss(output: Tensor, target, kind: str) -> Tensor:
    if kind == "mse":
        return ad.squared_error(output, target)
    return ad.cross_entropy(output, np.asarray(target))


def rd_loss(output: Tensor, target, rate_terms: list[RateTerm], sigma, config: RDObjectiveConfig,
            weights: Tensor | None = None, decay_mask: np.ndarray | None = None) -> tuple[Tensor, dict]:
    """distortion + lambda * ||W||^2 + beta_total * sum of soft cross entropies H(q, p).

    Returns the differentiable loss and a dict of float parts
    (``distortion``, ``rate_bits``, ``reg``).
    """
    try:
        distortion = sample_loss(output, target, config.loss_kind)
        total = distortion
        parts = {"distortion": distortion.item(), "rate_bits": 0.0, "reg": 0.0}
        if config.lam > 0 and weights is not None:
            w = weights if decay_mask is None else ad.getitem(weights, decay_mask)
            reg = ad.sum_(ad.square(w))
            parts["reg"] = reg.item()
            total = total + config.lam * reg
        if rate_terms:
            rate = None
            for term in rate_terms:
                if term.assignments is not None:
                    h = assignment_cross_entropy(term.assignments, term.pmf)
                else:
                    h = soft_cross_entropy_qp(term.columns, term.centers, sigma, term.pmf)
                rate = h if rate is None else rate + h
            parts["rate_bits"] = rate.item()
            if config.beta_total > 0:
                total = total + config.beta_total * rate
    except NonFiniteError as err:
        raise TrainingDiverged(f"non-finite value in the rate-distortion loss: {err}") from err
    return total, parts
