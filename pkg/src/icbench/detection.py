"""Polychromatic Beer-Lambert detection and Poisson measurement sampling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .geometry import Spectrum
from .projector import SystemMatrix

__all__ = ["Measurements", "expected_counts", "expected_counts_from_paths", "sample_measurements"]


@dataclass
class Measurements:
    counts: np.ndarray  # integer photon counts, one per ray
    expectation: np.ndarray  # the noiseless means the counts were drawn from
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.expectation = np.asarray(self.expectation, dtype=np.float64)
        if self.counts.shape != self.expectation.shape:
            raise DomainError("counts and expectation shapes differ")
        if (self.counts < 0).any():
            raise DomainError("negative photon counts")


def expected_counts_from_paths(paths: np.ndarray, spectrum: Spectrum) -> np.ndarray:
    """Expected counts for given material path lengths (um) per ray.

    Sums the discrete spectral lines exactly: each line contributes
    efficiency * (n * weight) * exp(-alpha * path).
    """
    paths = np.asarray(paths, dtype=np.float64)
    g0 = np.zeros_like(paths)
    n = spectrum.photons_per_ray
    for line in spectrum.lines:
        g0 += line.detector_efficiency * n * line.weight * np.exp(-line.alpha_per_um * paths)
    return g0


def expected_counts(A: SystemMatrix, volume: np.ndarray, spectrum: Spectrum) -> np.ndarray:
    """Noiseless detector means g0 for a volume with values in [0, 1]."""
    vol = np.asarray(volume, dtype=np.float64)
    if (vol < 0).any():
        raise DomainError("volume values must be nonnegative")
    if (vol > 1).any():
        raise DomainError("volume values must be <= 1")
    return expected_counts_from_paths(A.project(vol), spectrum)


def sample_measurements(g0: np.ndarray, seed: int) -> Measurements:
    """Independent Poisson draws with means g0; deterministic given seed."""
    g0 = np.asarray(g0, dtype=np.float64)
    if (g0 < 0).any():
        raise DomainError("Poisson means must be nonnegative")
    rng = np.random.default_rng(seed)
    counts = rng.poisson(g0)
    return Measurements(counts=counts, expectation=g0, meta={"seed": int(seed)})
