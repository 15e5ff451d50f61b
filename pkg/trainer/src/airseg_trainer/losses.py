"""Segmentation losses over probability maps.

All losses take predicted probabilities (already through the sigmoid)
and binary targets, and reduce to a scalar by mean. Probabilities are
clamped away from {0, 1} before any logarithm so the losses stay finite;
the clamp is shared between BCE and focal so that focal with gamma = 0
and alpha = 1 reduces to BCE exactly.
"""

from __future__ import annotations

import torch

EPS = 1e-7
DICE_SMOOTH = 1.0


def _clamped(probs: torch.Tensor) -> torch.Tensor:
    return probs.clamp(EPS, 1.0 - EPS)


def bce_loss(probs: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy of probabilities against a binary target."""
    p = _clamped(probs)
    return -(target * torch.log(p) + (1.0 - target) * torch.log(1.0 - p)).mean()


def soft_dice(probs: torch.Tensor, target: torch.Tensor,
              smooth: float = DICE_SMOOTH) -> torch.Tensor:
    """Differentiable Dice overlap in [0, 1]; 1 for a perfect match.

    The smoothing constant keeps the ratio defined (and equal to 1) when
    both prediction and target are empty.
    """
    inter = (probs * target).sum()
    total = probs.sum() + target.sum()
    return (2.0 * inter + smooth) / (total + smooth)


def combined_loss(probs: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Equal-weight sum of BCE and the Dice deficit (1 - soft Dice)."""
    return bce_loss(probs, target) + (1.0 - soft_dice(probs, target))


def focal_loss(probs: torch.Tensor, target: torch.Tensor,
               alpha: float = 0.25, gamma: float = 2.0) -> torch.Tensor:
    """Mean of -alpha * (1 - p_t)^gamma * log(p_t).

    p_t is the predicted probability of the true class, so easy samples
    (p_t near 1) are down-weighted by the (1 - p_t)^gamma factor. With
    gamma = 0 and alpha = 1 this is exactly ``bce_loss``.
    """
    p = _clamped(probs)
    p_t = torch.where(target > 0.5, p, 1.0 - p)
    return (-alpha * (1.0 - p_t) ** gamma * torch.log(p_t)).mean()
