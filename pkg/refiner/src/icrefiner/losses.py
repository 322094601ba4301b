"""Supervised and adversarial loss terms."""

from __future__ import annotations

import torch
import torch.nn.functional as F

__all__ = ["pearson_loss", "generator_adversarial_loss", "discriminator_loss"]


def pearson_loss(prediction: torch.Tensor, target: torch.Tensor, eps: float = 1e-8) -> torch.Tensor:
    """Negative Pearson correlation, averaged over the batch.

    A volume correlated perfectly with the target gives -1; an uncorrelated
    one gives ~0.
    """
    p = prediction.flatten(1).float()
    t = target.flatten(1).float()
    p = p - p.mean(dim=1, keepdim=True)
    t = t - t.mean(dim=1, keepdim=True)
    num = (p * t).sum(dim=1)
    den = torch.sqrt((p * p).sum(dim=1) * (t * t).sum(dim=1)).clamp_min(eps)
    return -(num / den).mean()


def generator_adversarial_loss(fake_logits: torch.Tensor) -> torch.Tensor:
    return F.binary_cross_entropy_with_logits(fake_logits, torch.ones_like(fake_logits))


def discriminator_loss(real_logits: torch.Tensor, fake_logits: torch.Tensor) -> torch.Tensor:
    real = F.binary_cross_entropy_with_logits(real_logits, torch.ones_like(real_logits))
    fake = F.binary_cross_entropy_with_logits(fake_logits, torch.zeros_like(fake_logits))
    return real + fake
