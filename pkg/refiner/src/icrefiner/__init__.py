"""Learned generative refinement of tomographic circuit reconstructions."""

from .config import ModelConfig, TrainConfig, VARIANTS
from .errors import ConfigError, DataError, RefinerError, TrainingDiverged
from .io import Archive, Pair, load_archive, read_cfv, read_rec, write_rec
from .losses import pearson_loss
from .models import AxialAttention, Discriminator, Generator, build_models
from .scattering import feature_dim, scattering_features
from .train import (
    TrainedPrior,
    load_prior,
    refine,
    save_prior,
    sweep_adversarial_weight,
    train,
)

__version__ = "0.1.0"
