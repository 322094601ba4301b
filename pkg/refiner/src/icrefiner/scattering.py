"""Training-free multiscale scattering features of a volume.

A cascade of periodic wavelet-modulus operators: per axis and dyadic scale
j, the band-pass W_j = P_{2^(j-1)} - P_{2^j} (difference of circular moving
averages) is applied, the modulus taken, and the spatial mean recorded.
Second-order coefficients re-filter the first-order modulus fields at
coarser scales.  All kernels are zero-mean, so a zero (or constant) volume
yields zero first- and second-order coefficients, and every operation is
circular-shift equivariant, making the mean-pooled features translation
invariant.
"""

from __future__ import annotations

import torch

__all__ = ["scattering_features", "feature_dim"]


def _moving_average(x: torch.Tensor, window: int, dim: int) -> torch.Tensor:
    if window <= 1:
        return x
    acc = torch.zeros_like(x)
    for shift in range(window):
        acc = acc + torch.roll(x, shifts=-shift, dims=dim)
    return acc / window


def _wavelet(x: torch.Tensor, scale: int, dim: int) -> torch.Tensor:
    return _moving_average(x, 2 ** (scale - 1), dim) - _moving_average(x, 2**scale, dim)


def feature_dim(scales: int, ndim: int = 3) -> int:
    first = scales * ndim
    second = sum(1 for j in range(1, scales + 1) for k in range(j + 1, scales + 1)) * ndim * ndim
    return 1 + first + second


def scattering_features(volume: torch.Tensor, scales: int = 2) -> torch.Tensor:
    """(B, X, Y, Z) or (X, Y, Z) volume -> (B, F) feature tensor."""
    squeeze = volume.dim() == 3
    x = volume.unsqueeze(0) if squeeze else volume
    x = x.float()
    dims = (1, 2, 3)
    feats = [x.mean(dim=dims)]  # zeroth order
    first_fields = []
    for j in range(1, scales + 1):
        for d in dims:
            field = _wavelet(x, j, d).abs()
            first_fields.append((j, field))
            feats.append(field.mean(dim=dims))
    for j, field in first_fields:
        for k in range(j + 1, scales + 1):
            for d in dims:
                feats.append(_wavelet(field, k, d).abs().mean(dim=dims))
    out = torch.stack(feats, dim=1)
    return out.squeeze(0) if squeeze else out
