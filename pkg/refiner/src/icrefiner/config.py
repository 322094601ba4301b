"""Model and training configuration with the documented defaults."""

from __future__ import annotations

from dataclasses import dataclass, asdict

from .errors import ConfigError

VARIANTS = ("baseline", "axial", "scatter", "axial-scatter")

__all__ = ["ModelConfig", "TrainConfig", "VARIANTS"]


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "baseline"
    base_channels: int = 16
    depth: int = 2
    attention_m: int = 4  # local constraint of the per-axis attention
    attention_heads: int = 2
    scattering_scales: int = 2
    adversarial_weight: float = 0.01
    conditional_discriminator: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.base_channels < 1 or self.depth < 1 or self.attention_heads < 1:
            raise ConfigError("channel widths, depth, and heads must be >= 1")
        if self.attention_m < 1:
            raise ConfigError("attention local constraint m must be >= 1")
        if self.scattering_scales < 1:
            raise ConfigError("scattering_scales must be >= 1")
        if self.adversarial_weight < 0:
            raise ConfigError("adversarial weight must be >= 0")

    @property
    def uses_attention(self) -> bool:
        return self.variant in ("axial", "axial-scatter")

    @property
    def uses_scattering(self) -> bool:
        return self.variant in ("scatter", "axial-scatter")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TrainConfig:
    generator_lr: float = 1e-4
    discriminator_lr: float = 4e-4
    beta1: float = 0.9
    beta2: float = 0.999
    generator_updates_per_discriminator_update: int = 4
    max_epochs: int = 200
    plateau_patience_halve: int = 5
    plateau_patience_stop: int = 20
    min_lr: float = 1e-8
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.generator_lr <= 0 or self.discriminator_lr <= 0 or self.min_lr <= 0:
            raise ConfigError("step sizes must be positive")
        if self.plateau_patience_halve <= 0 or self.plateau_patience_stop <= 0:
            raise ConfigError("patience values must be positive")
        if self.max_epochs < 1 or self.batch_size < 1:
            raise ConfigError("max_epochs and batch_size must be >= 1")
        if self.generator_updates_per_discriminator_update < 1:
            raise ConfigError("generator update ratio must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)
