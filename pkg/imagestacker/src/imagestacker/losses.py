"""Training losses: large-margin cosine classification, multi-label
pattern prediction, and their weighted combination."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as tf

from .stacking import ShapeError

PROB_CLAMP = 1e-7


class NumericError(ValueError):
    pass


@dataclass
class LossConfig:
    margin: float = 0.35
    scale: float = 64.0
    balance: float = 1.0

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if self.scale <= 0:
            raise ValueError("scale must be > 0")
        if self.balance < 0:
            raise ValueError("balance must be >= 0")


def cosface_loss(features: torch.Tensor, labels: torch.Tensor,
                 class_weights: torch.Tensor, m: float = 0.35,
                 s: float = 64.0) -> torch.Tensor:
    """Cross-entropy over s * (cos(theta) - m * 1[y]) cosine logits.

    features: (B, D); labels: (B,) class indices; class_weights: (C, D).
    Both features and weight rows are normalized to unit length here.
    """
    if not torch.isfinite(features).all():
        raise NumericError("non-finite features")
    if features.ndim != 2 or class_weights.ndim != 2 \
            or features.shape[1] != class_weights.shape[1]:
        raise ShapeError(f"feature/weight shapes incompatible: "
                         f"{tuple(features.shape)} vs {tuple(class_weights.shape)}")
    cos = tf.normalize(features, dim=1) @ tf.normalize(class_weights, dim=1).T
    onehot = tf.one_hot(labels, num_classes=class_weights.shape[0]).to(cos.dtype)
    return tf.cross_entropy(s * (cos - m * onehot), labels)


def bce_pattern_loss(p: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Binary cross-entropy summed over pattern classes, averaged over the
    batch. p: (B, C) predicted probabilities; y: (B, C) multi-hot labels."""
    if p.shape != y.shape:
        raise ShapeError(f"probability/label shapes differ: "
                         f"{tuple(p.shape)} vs {tuple(y.shape)}")
    p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
    per_image = -(y * p.log() + (1.0 - y) * (1.0 - p).log()).sum(dim=-1)
    return per_image.mean()


def combined_loss(cls_term: torch.Tensor, ptr_term: torch.Tensor,
                  balance: float = 1.0) -> torch.Tensor:
    if balance < 0:
        raise ValueError("balance must be >= 0")
    return cls_term + balance * ptr_term
