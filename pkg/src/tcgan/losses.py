"""Scalar training objectives: adversarial, mutual-information and total-correlation terms.

All losses operate in logit space (no probability clamping); probabilities
only appear in telemetry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .latent import GaussianPosterior, LatentBatch

HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class LossWeights:
    """Weights of the mutual-information and total-correlation regularizers."""

    lambda_mi: float = 0.1
    beta_tc: float = 0.001

    def __post_init__(self):
        if not (math.isfinite(self.lambda_mi) and math.isfinite(self.beta_tc)):
            raise ValueError("loss weights must be finite")
        if self.lambda_mi < 0 or self.beta_tc < 0:
            raise ValueError("loss weights must be nonnegative")


@dataclass
class LossReport:
    """Per-step training telemetry."""

    d_loss: float
    g_adv_loss: float
    mi_loss: float
    tc_loss: float
    tcd_loss: float
    d_real_acc: float
    d_fake_acc: float

    def as_dict(self) -> dict:
        return {
            "d_loss": self.d_loss,
            "g_adv_loss": self.g_adv_loss,
            "mi_loss": self.mi_loss,
            "tc_loss": self.tc_loss,
            "tcd_loss": self.tcd_loss,
            "d_real_acc": self.d_real_acc,
            "d_fake_acc": self.d_fake_acc,
        }


def _require_nonempty(t: torch.Tensor, name: str):
    if t.numel() == 0:
        raise ValueError(f"{name} must be non-empty")


def discriminator_loss(real_logits: torch.Tensor, fake_logits: torch.Tensor) -> torch.Tensor:
    """Discriminator side of the minimax objective.

    Returns -[mean log sigmoid(real) + mean log(1 - sigmoid(fake))]; minimized
    when the discriminator is correct on both batches.
    """
    _require_nonempty(real_logits, "real_logits")
    _require_nonempty(fake_logits, "fake_logits")
    return -(F.logsigmoid(real_logits).mean() + F.logsigmoid(-fake_logits).mean())


def generator_adversarial_loss(fake_logits: torch.Tensor) -> torch.Tensor:
    """Non-saturating generator loss: -mean log sigmoid(fake)."""
    _require_nonempty(fake_logits, "fake_logits")
    return -F.logsigmoid(fake_logits).mean()


def mi_loss(
    sampled: LatentBatch,
    posterior: GaussianPosterior,
    discrete_logits: list[torch.Tensor],
) -> torch.Tensor:
    """Negative log-likelihood of the sampled codes under the auxiliary posterior.

    Continuous part: diagonal-Gaussian NLL of ``sampled.continuous`` under
    (mean, std), summed over code dimensions and averaged over the batch.
    Discrete part: categorical cross-entropy per code, summed over codes.
    Minimizing this maximizes the variational mutual-information lower bound
    (up to the constant prior entropy, which is dropped).
    """
    z = sampled.continuous
    if posterior.mean.shape != z.shape:
        raise ValueError(
            f"posterior shape {tuple(posterior.mean.shape)} does not match sampled continuous codes {tuple(z.shape)}"
        )
    if len(discrete_logits) != sampled.discrete.shape[1]:
        raise ValueError(
            f"got {len(discrete_logits)} discrete logit blocks for {sampled.discrete.shape[1]} codes"
        )
    total = z.new_zeros(())
    if z.shape[1] > 0:
        if (posterior.std <= 0).any():
            raise ValueError("posterior std must be strictly positive")
        nll = HALF_LOG_TWO_PI + torch.log(posterior.std) + 0.5 * ((z - posterior.mean) / posterior.std) ** 2
        total = total + nll.sum(dim=1).mean()
    for j, logits in enumerate(discrete_logits):
        total = total + F.cross_entropy(logits, sampled.discrete[:, j])
    return total


def tc_loss_from_logits(tcd_logits: torch.Tensor) -> torch.Tensor:
    """Density-ratio estimate of the total correlation.

    The TC discriminator's probability-of-joint is sigmoid(logit), so
    log(p / (1 - p)) is the raw logit and the estimate is just the mean logit.
    """
    _require_nonempty(tcd_logits, "tcd_logits")
    return tcd_logits.mean()


def tcd_loss(joint_logits: torch.Tensor, permuted_logits: torch.Tensor) -> torch.Tensor:
    """Binary cross-entropy of the TC discriminator.

    Joint samples are labeled 1, permuted (product-of-marginals) samples 0.
    """
    _require_nonempty(joint_logits, "joint_logits")
    _require_nonempty(permuted_logits, "permuted_logits")
    return -0.5 * (F.logsigmoid(joint_logits).mean() + F.logsigmoid(-permuted_logits).mean())


def combined_generator_objective(
    g_adv: torch.Tensor, mi: torch.Tensor, tc: torch.Tensor, w: LossWeights
) -> torch.Tensor:
    """Weighted generator-side objective: g_adv + lambda_mi * mi + beta_tc * tc.

    ``mi`` is the NLL from :func:`mi_loss` (already the negation of the
    mutual-information bound), so adding it penalizes low mutual information.
    """
    return g_adv + w.lambda_mi * mi + w.beta_tc * tc
