"""Training objectives for the refinement and restoration networks.

All functions take NCHW torch tensors and return scalar tensors.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F

from app.core.errors import NumericError, ShapeError
from app.core.feature_extractor import FeatureExtractor
from app.models.training import AdversarialForm, LossWeights, TVVariant

logger = logging.getLogger(__name__)

CE_EPSILON = 1e-8

# Column order of the per-iteration training log
LOSS_TERMS = (
    "l_ref",
    "l_adv_g1",
    "l_g1",
    "l_d1",
    "l_l1",
    "l_adv_g2",
    "l_perc",
    "l_style",
    "l_tv",
    "l_g2",
    "l_d2",
)


def _check_not_nan(tensor: torch.Tensor, name: str) -> None:
    if torch.isnan(tensor).any():
        raise NumericError(f"{name} contains NaN")


def _check_same_shape(a: torch.Tensor, b: torch.Tensor, name: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{name}: shapes {tuple(a.shape)} and {tuple(b.shape)} differ")


def refinement_loss(s_r: torch.Tensor, s_gt: torch.Tensor, eps: float = CE_EPSILON) -> torch.Tensor:
    """Cross-entropy of probabilities ``s_r`` (N, K, H, W) against class ids ``s_gt`` (N, H, W)."""
    if s_r.dim() != 4 or s_gt.dim() != 3 or s_r.shape[0] != s_gt.shape[0] or s_r.shape[2:] != s_gt.shape[1:]:
        raise ShapeError(f"refinement_loss: {tuple(s_r.shape)} vs labels {tuple(s_gt.shape)}")
    if s_gt.numel() and int(s_gt.max()) >= s_r.shape[1]:
        raise ShapeError(f"refinement_loss: label {int(s_gt.max())} with only K={s_r.shape[1]} channels")
    picked = s_r.clamp_min(eps).gather(1, s_gt.long().unsqueeze(1))
    return -picked.log().mean()


def ls_adversarial_losses(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Least-squares (discriminator, generator) objectives with targets 1 (real) and 0 (fake)."""
    form = AdversarialForm.LEAST_SQUARES
    return discriminator_adversarial_loss(real_scores, fake_scores, form), generator_adversarial_loss(fake_scores, form)


def discriminator_adversarial_loss(
    real_scores: torch.Tensor,
    fake_scores: torch.Tensor,
    form: AdversarialForm = AdversarialForm.LEAST_SQUARES,
) -> torch.Tensor:
    _check_not_nan(real_scores, "real scores")
    _check_not_nan(fake_scores, "fake scores")
    if form == AdversarialForm.LEAST_SQUARES:
        return ((real_scores - 1.0) ** 2).mean() + (fake_scores**2).mean()
    return F.binary_cross_entropy_with_logits(
        real_scores, torch.ones_like(real_scores)
    ) + F.binary_cross_entropy_with_logits(fake_scores, torch.zeros_like(fake_scores))


def generator_adversarial_loss(
    fake_scores: torch.Tensor,
    form: AdversarialForm = AdversarialForm.LEAST_SQUARES,
) -> torch.Tensor:
    _check_not_nan(fake_scores, "fake scores")
    if form == AdversarialForm.LEAST_SQUARES:
        return ((fake_scores - 1.0) ** 2).mean()
    # non-saturating log form
    return F.binary_cross_entropy_with_logits(fake_scores, torch.ones_like(fake_scores))


def l1_loss(i_r: torch.Tensor, i_gt: torch.Tensor) -> torch.Tensor:
    _check_same_shape(i_r, i_gt, "l1_loss")
    return (i_r - i_gt).abs().mean()


def gram_matrix(features: torch.Tensor) -> torch.Tensor:
    """(N, C, H, W) -> (N, C, C), normalized by C*H*W."""
    n, c, h, w = features.shape
    flat = features.reshape(n, c, h * w)
    return torch.bmm(flat, flat.transpose(1, 2)) / (c * h * w)


def perceptual_loss(f: FeatureExtractor, i_r: torch.Tensor, i_gt: torch.Tensor) -> torch.Tensor:
    _check_same_shape(i_r, i_gt, "perceptual_loss")
    return sum((a - b).abs().mean() for a, b in zip(f(i_gt), f(i_r)))


def style_loss(f: FeatureExtractor, i_r: torch.Tensor, i_gt: torch.Tensor) -> torch.Tensor:
    _check_same_shape(i_r, i_gt, "style_loss")
    return sum((gram_matrix(a) - gram_matrix(b)).abs().mean() for a, b in zip(f(i_gt), f(i_r)))


def tv_loss(i_r: torch.Tensor, variant: TVVariant = TVVariant.CONVENTIONAL) -> torch.Tensor:
    h, w = i_r.shape[-2:]
    if h < 2 or w < 2:
        raise ShapeError(f"tv_loss needs H, W >= 2, got {h}x{w}")
    if variant == TVVariant.CONVENTIONAL:
        dx = i_r[..., :, 1:] - i_r[..., :, :-1]
        dy = i_r[..., 1:, :] - i_r[..., :-1, :]
        return dx.abs().mean() + dy.abs().mean()
    # Difference of the two forward gradients on the common (H-1) x (W-1) grid
    dx = i_r[..., :-1, 1:] - i_r[..., :-1, :-1]
    dy = i_r[..., 1:, :-1] - i_r[..., :-1, :-1]
    return (dx - dy).abs().mean()


def total_g1_loss(w: LossWeights, adversarial: torch.Tensor, refinement: torch.Tensor) -> torch.Tensor:
    return adversarial + w.lambda_ref * refinement


def total_g2_loss(
    w: LossWeights,
    l1: torch.Tensor,
    adversarial: torch.Tensor,
    perceptual: torch.Tensor,
    style: torch.Tensor,
    tv: torch.Tensor,
) -> torch.Tensor:
    return (
        w.lambda_l1 * l1
        + w.lambda_adv * adversarial
        + w.lambda_perc * perceptual
        + w.lambda_style * style
        + w.tv_weight * tv
    )


@dataclass
class LossReport:
    """Named scalar values of one training iteration."""

    values: dict[str, float] = field(default_factory=dict)

    def record(self, **terms: torch.Tensor | float) -> "LossReport":
        for name, value in terms.items():
            self.values[name] = float(value.detach()) if isinstance(value, torch.Tensor) else float(value)
        return self

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.values.values())

    def as_row(self) -> list[str]:
        return [repr(self.values[name]) if name in self.values else "" for name in LOSS_TERMS]

    def totals(self) -> dict[str, float]:
        return {k: v for k, v in self.values.items() if k in ("l_g1", "l_d1", "l_g2", "l_d2")}
