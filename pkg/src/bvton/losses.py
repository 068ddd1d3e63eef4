"""Training objectives, each as a standalone differentiable function.

Every pixel loss is a mean, not a sum, so the weight vector is independent
of resolution. The layout objective combines cross-entropy, conditional GAN,
total-variation and attention-warping terms; the synthesis objective
combines perceptual, L1, conditional GAN and feature-matching terms.
"""

from dataclasses import dataclass

import torch

from .blocks import attention_transform
from .errors import ContractViolation
from .warp import backward_warp, total_variation

__all__ = [
    "LossWeights", "flow_l1_loss", "cross_entropy_layout", "lsgan_loss",
    "perceptual_loss", "feature_matching_loss", "attention_warp_loss",
    "combine_layout_loss", "combine_rgb_loss", "total_variation",
]


@dataclass(frozen=True)
class LossWeights:
    """Weights for the layout objective (1-4) and the synthesis objective (5-8)."""

    lambda1: float = 10.0   # layout cross entropy
    lambda2: float = 1.0    # layout conditional GAN
    lambda3: float = 0.1    # layout total variation
    lambda4: float = 1.0    # attention warping
    lambda5: float = 10.0   # perceptual
    lambda6: float = 1.0    # reconstruction L1
    lambda7: float = 1.0    # synthesis conditional GAN
    lambda8: float = 1.0    # feature matching

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value < 0:
                raise ContractViolation(f"{name} must be nonnegative, got {value}")


def flow_l1_loss(target: torch.Tensor, source: torch.Tensor,
                 flow: torch.Tensor) -> torch.Tensor:
    """Mean absolute error between `target` and `source` back-warped by `flow`.

    Used both for images and for part masks (mask warping applies the same
    objective to the masks).
    """
    return (target - backward_warp(source, flow)).abs().mean()


def cross_entropy_layout(logits: torch.Tensor, onehot: torch.Tensor,
                         class_dim: int = -1) -> torch.Tensor:
    """Mean per-pixel negative log-likelihood against a one-hot layout."""
    if logits.shape != onehot.shape:
        raise ContractViolation(
            f"logits {tuple(logits.shape)} vs layout {tuple(onehot.shape)}")
    logp = torch.log_softmax(logits, dim=class_dim)
    return -(onehot * logp).sum(dim=class_dim).mean()


def lsgan_loss(score_maps, real_target: bool) -> torch.Tensor:
    """Least-squares GAN term: mean squared distance to the target label
    (1 for real, 0 for fake), averaged over scales."""
    if torch.is_tensor(score_maps):
        score_maps = [score_maps]
    label = 1.0 if real_target else 0.0
    terms = [(s - label).pow(2).mean() for s in score_maps]
    return torch.stack(terms).mean()


def perceptual_loss(a: torch.Tensor, b: torch.Tensor, extractor) -> torch.Tensor:
    """Sum over extractor levels of the mean absolute feature difference."""
    feats_a = extractor(a)
    feats_b = extractor(b)
    total = a.sum() * 0.0
    for fa, fb in zip(feats_a, feats_b):
        total = total + (fa - fb).abs().mean()
    return total


def feature_matching_loss(feats_real, feats_fake) -> torch.Tensor:
    """Mean absolute difference per discriminator layer, averaged over
    layers and scales. Accepts a flat list of tensors or a list per scale."""
    if torch.is_tensor(feats_real[0]):
        feats_real, feats_fake = [feats_real], [feats_fake]
    terms = []
    for scale_r, scale_f in zip(feats_real, feats_fake):
        for fr, ff in zip(scale_r, scale_f):
            terms.append((fr - ff).abs().mean())
    return torch.stack(terms).mean()


def attention_warp_loss(corr: torch.Tensor, clothes_map: torch.Tensor,
                        target_map: torch.Tensor, alpha: float) -> torch.Tensor:
    """L1 between the attention-warped clothes map and the target map.

    clothes_map/target_map: (H, W, C) spatial maps matching the correlation
    matrix's HW positions; both are flattened to (HW, C).
    """
    flat_c = clothes_map.reshape(-1, clothes_map.shape[-1])
    flat_t = target_map.reshape(-1, target_map.shape[-1])
    warped = attention_transform(corr, flat_c, alpha)
    return (warped - flat_t).abs().mean()


def combine_layout_loss(parts, weights: LossWeights = LossWeights()) -> torch.Tensor:
    """Weighted layout objective from (ce, cgan, tv, warp) parts."""
    ce, cgan, tv, warp_term = parts
    return (weights.lambda1 * ce + weights.lambda2 * cgan
            + weights.lambda3 * tv + weights.lambda4 * warp_term)


def combine_rgb_loss(parts, weights: LossWeights = LossWeights()) -> torch.Tensor:
    """Weighted synthesis objective from (perceptual, l1, cgan, feat) parts."""
    vgg, l1, cgan, feat = parts
    return (weights.lambda5 * vgg + weights.lambda6 * l1
            + weights.lambda7 * cgan + weights.lambda8 * feat)
