"""Generator and discriminator architectures.

The generator is a volumetric convolutional encoder-decoder mapping a
16x16x8 reconstruction (plus fixed coordinate-parity channels, since the
circuit prior is anchored to the voxel lattice) to a same-shaped volume in
[0, 1].  Every convolution and linear weight is spectrally normalized.  The
axial variants replace the encoder convolutions with sequential per-axis
windowed attention whose cost scales as O(h*w*z*m); the scattering variants
condition the normalized activations on training-free scattering features
through a learned per-channel scale and shift.

The output head starts gated off, so an untrained generator is dominated by
the identity skip from its input.
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn.utils.parametrizations import spectral_norm

from .config import ModelConfig
from .errors import ConfigError
from .scattering import feature_dim, scattering_features

__all__ = ["Generator", "Discriminator", "build_models", "AxialAttention"]

_COORD_CHANNELS = 6


def _coordinate_channels(shape, device) -> torch.Tensor:
    """Fixed per-voxel lattice features: axis parities and normalized depth."""
    nx, ny, nz = shape
    ix = torch.arange(nx, device=device).view(nx, 1, 1).expand(nx, ny, nz)
    iy = torch.arange(ny, device=device).view(1, ny, 1).expand(nx, ny, nz)
    iz = torch.arange(nz, device=device).view(1, 1, nz).expand(nx, ny, nz)
    layer = iz + 1  # 1-based layer index; odd layers carry wires, even are vias
    feats = [
        (ix % 2).float(),
        (iy % 2).float(),
        (layer % 2).float(),
        ((layer % 4) == 1).float(),  # wires along the first axis
        ((layer % 4) == 3).float(),  # wires along the second axis
        iz.float() / max(nz - 1, 1),
    ]
    return torch.stack(feats, dim=0)


def _conv(in_ch, out_ch, stride=1):
    return spectral_norm(nn.Conv3d(in_ch, out_ch, 3, stride=stride, padding=1))


class FiLM(nn.Module):
    """Scale-and-shift of normalized activations from a conditioning vector."""

    def __init__(self, channels: int, cond_dim: int):
        super().__init__()
        self.norm = nn.InstanceNorm3d(channels, affine=False)
        self.map = spectral_norm(nn.Linear(cond_dim, 2 * channels))

    def forward(self, x, cond):
        gamma, beta = self.map(cond).chunk(2, dim=1)
        gamma = gamma[:, :, None, None, None]
        beta = beta[:, :, None, None, None]
        return self.norm(x) * (1 + gamma) + beta


class AxialAttention(nn.Module):
    """Windowed self-attention along one spatial axis of a (B,C,X,Y,Z) map.

    Each position attends to circular neighbors within +-m along `axis`, so
    the cost is proportional to (number of positions) * window, i.e.
    O(h*w*z*m).  Multiply-accumulate counts of the last forward pass are
    recorded in `last_op_count` for the scaling audit.
    """

    def __init__(self, channels: int, axis: int, m: int, heads: int = 2):
        super().__init__()
        if channels % heads != 0:
            raise ConfigError("channels must be divisible by attention heads")
        self.axis = axis  # 0, 1, 2 -> spatial dims 2, 3, 4
        self.m = m
        self.heads = heads
        self.qkv = spectral_norm(nn.Conv3d(channels, 3 * channels, 1))
        self.proj = spectral_norm(nn.Conv3d(channels, channels, 1))
        self.scale = (channels // heads) ** -0.5
        self.last_op_count = 0

    def forward(self, x):
        b, c, *_ = x.shape
        dim = 2 + self.axis
        length = x.shape[dim]
        window = [s for s in range(-self.m, self.m + 1) if abs(s) < length]
        q, k, v = self.qkv(x).chunk(3, dim=1)
        hd = c // self.heads

        def heads_view(t):
            return t.view(b, self.heads, hd, *t.shape[2:])

        q, k, v = heads_view(q) * self.scale, heads_view(k), heads_view(v)
        shift_dim = dim + 1  # account for the heads dimension
        scores = torch.stack(
            [(q * torch.roll(k, s, dims=shift_dim)).sum(dim=2) for s in window], dim=-1
        )
        attn = torch.softmax(scores, dim=-1)
        out = torch.zeros_like(v)
        for i, s in enumerate(window):
            out = out + attn[..., i].unsqueeze(2) * torch.roll(v, s, dims=shift_dim)
        out = out.reshape(b, c, *x.shape[2:])
        # one qk product and one av product per (position, head-dim, window slot)
        self.last_op_count = 2 * q.numel() * len(window)
        return self.proj(out)


class EncoderBlock(nn.Module):
    def __init__(self, channels: int, cfg: ModelConfig, cond_dim: int | None):
        super().__init__()
        if cfg.uses_attention:
            self.mix = nn.ModuleList([
                AxialAttention(channels, axis, cfg.attention_m, cfg.attention_heads)
                for axis in range(3)
            ])
        else:
            self.mix = _conv(channels, channels)
        self.film = FiLM(channels, cond_dim) if cond_dim else None
        self.norm = None if cond_dim else nn.InstanceNorm3d(channels, affine=True)
        self.act = nn.GELU()

    def forward(self, x, cond=None):
        if isinstance(self.mix, nn.ModuleList):
            h = x
            for attention in self.mix:
                h = attention(h)
        else:
            h = self.mix(x)
        h = self.film(h, cond) if self.film else self.norm(h)
        return self.act(h) + x


class DecoderBlock(nn.Module):
    def __init__(self, channels: int, cond_dim: int | None):
        super().__init__()
        self.conv = _conv(channels, channels)
        self.film = FiLM(channels, cond_dim) if cond_dim else None
        self.norm = None if cond_dim else nn.InstanceNorm3d(channels, affine=True)
        self.act = nn.GELU()

    def forward(self, x, cond=None):
        h = self.conv(x)
        h = self.film(h, cond) if self.film else self.norm(h)
        return self.act(h) + x


class Generator(nn.Module):
    """Bottlenecked autoencoder: strided encoder down to a coarse grid, a
    dense latent map mixing the whole volume, and a decoder with skip
    connections back to full resolution."""

    def __init__(self, cfg: ModelConfig, input_dims: tuple[int, int, int] = (16, 16, 8)):
        super().__init__()
        self.cfg = cfg
        self.input_dims = tuple(input_dims)
        c = cfg.base_channels
        cond_dim = feature_dim(cfg.scattering_scales) if cfg.uses_scattering else None
        self.stem = _conv(1 + _COORD_CHANNELS, c)
        self.enc_full = nn.ModuleList(
            [EncoderBlock(c, cfg, cond_dim) for _ in range(cfg.depth)]
        )
        self.down1 = _conv(c, 2 * c, stride=2)
        self.enc_half = nn.ModuleList(
            [EncoderBlock(2 * c, cfg, cond_dim) for _ in range(cfg.depth)]
        )
        self.down2 = _conv(2 * c, 4 * c, stride=2)
        quarter = [-(-n // 4) for n in self.input_dims]  # two ceil-halvings
        latent_size = 4 * c * quarter[0] * quarter[1] * quarter[2]
        self.latent = spectral_norm(nn.Linear(latent_size, latent_size))
        self.up1 = spectral_norm(
            nn.ConvTranspose3d(4 * c, 2 * c, 4, stride=2, padding=1)
        )
        self.dec_half = DecoderBlock(2 * c, cond_dim)
        self.up2 = spectral_norm(
            nn.ConvTranspose3d(2 * c, c, 4, stride=2, padding=1)
        )
        self.dec_full = DecoderBlock(c, cond_dim)
        self.head = _conv(c, 1)
        # gated head: output starts as the identity skip of the input
        self.head_gate = nn.Parameter(torch.zeros(1))
        self.skip_gain = nn.Parameter(torch.tensor(4.0))
        self.act = nn.GELU()
        self._coords = None

    def _latent_map(self, h):
        flat = h.flatten(1)
        return self.act(self.latent(flat)).view_as(h) + h

    def forward(self, x):
        """x: (B, 1, X, Y, Z) reconstruction in [0, 1] -> same-shaped [0, 1]."""
        if x.dim() != 5 or x.shape[1] != 1:
            raise ConfigError(f"generator expects (B, 1, X, Y, Z), got {tuple(x.shape)}")
        if tuple(x.shape[2:]) != self.input_dims:
            raise ConfigError(
                f"generator was built for {self.input_dims}, got {tuple(x.shape[2:])}"
            )
        cond = None
        if self.cfg.uses_scattering:
            cond = scattering_features(x[:, 0], self.cfg.scattering_scales)
        if self._coords is None or self._coords.shape[1:] != x.shape[2:]:
            self._coords = _coordinate_channels(x.shape[2:], x.device)
        coords = self._coords.unsqueeze(0).expand(x.shape[0], -1, -1, -1, -1)
        h = self.stem(torch.cat([x, coords], dim=1))
        for block in self.enc_full:
            h = block(h, cond)
        skip_full = h
        h = self.act(self.down1(h))
        for block in self.enc_half:
            h = block(h, cond)
        skip_half = h
        h = self.act(self.down2(h))
        h = self._latent_map(h)
        h = self.dec_half(self.act(self.up1(h)) + skip_half, cond)
        h = self.dec_full(self.act(self.up2(h)) + skip_full, cond)
        logits = self.head_gate * self.head(h) + self.skip_gain * (x - 0.5)
        return torch.sigmoid(logits).clamp(0.0, 1.0)

    def attention_op_count(self) -> int:
        return sum(
            att.last_op_count
            for blocks in (self.enc_full, self.enc_half)
            for block in blocks
            if isinstance(block.mix, nn.ModuleList)
            for att in block.mix
        )


class Discriminator(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        c = cfg.base_channels
        in_ch = 2 if cfg.conditional_discriminator else 1
        self.net = nn.Sequential(
            spectral_norm(nn.Conv3d(in_ch, c, 3, stride=2, padding=1)),
            nn.GELU(),
            spectral_norm(nn.Conv3d(c, 2 * c, 3, stride=2, padding=1)),
            nn.GELU(),
            nn.AdaptiveAvgPool3d((4, 4, 2)),
        )
        self.classify = spectral_norm(nn.Linear(2 * c * 32, 1))
        self.conditional = cfg.conditional_discriminator

    def forward(self, volume, conditioning=None):
        if self.conditional:
            if conditioning is None:
                raise ConfigError("conditional discriminator needs the approximant")
            volume = torch.cat([volume, conditioning], dim=1)
        h = self.net(volume)
        return self.classify(h.flatten(1))


def build_models(
    cfg: ModelConfig, input_dims: tuple[int, int, int] = (16, 16, 8)
) -> tuple[Generator, Discriminator]:
    return Generator(cfg, input_dims), Discriminator(cfg)
