"""Cone-beam acquisition geometry and source spectrum.

Conventions: the object sits centered at the origin; the rotation axis is
z; at tilt 0 the beam axis is +y and the detector lies in the x-z plane.
Tilting by theta rotates the object about z, implemented by counter-
rotating source and detector.  All lengths are in micrometers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from importlib import resources

from .errors import ConfigError

__all__ = [
    "Geometry",
    "SpectralLine",
    "Spectrum",
    "calibrate_alpha",
    "default_geometry",
    "default_spectrum",
]

DEFAULT_TILTS = (-30.0, -22.5, -15.0, -7.5, 0.0, 7.5, 15.0, 22.5)


@dataclass(frozen=True)
class Geometry:
    nx: int = 16
    ny: int = 16
    nz: int = 8
    dx: float = 0.15
    dy: float = 0.15
    dz: float = 0.30
    source_sample_distance: float = 10.0
    magnification: float = 5000.0
    nu: int = 32
    nv: int = 32
    pixel_pitch: float = 420.0
    tilt_angles_deg: tuple[float, ...] = DEFAULT_TILTS

    def __post_init__(self):
        if min(self.dx, self.dy, self.dz) <= 0:
            raise ConfigError("voxel sizes must be positive")
        if min(self.nx, self.ny, self.nz, self.nu, self.nv) < 1:
            raise ConfigError("grid and detector dimensions must be >= 1")
        if self.magnification <= 1 or self.source_sample_distance <= 0:
            raise ConfigError("need magnification > 1 and positive source-sample distance")
        if self.pixel_pitch <= 0:
            raise ConfigError("pixel pitch must be positive")
        if len(self.tilt_angles_deg) < 1:
            raise ConfigError("at least one tilt angle required")

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def n_angles(self) -> int:
        return len(self.tilt_angles_deg)

    @property
    def n_rays(self) -> int:
        return self.n_angles * self.nu * self.nv

    @property
    def n_voxels(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def source_detector_distance(self) -> float:
        return self.source_sample_distance * self.magnification

    @property
    def extent(self) -> tuple[float, float, float]:
        """Half-widths of the volume bounding box."""
        return (self.nx * self.dx / 2, self.ny * self.dy / 2, self.nz * self.dz / 2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tilt_angles_deg"] = list(self.tilt_angles_deg)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Geometry":
        d = dict(d)
        if "tilt_angles_deg" in d:
            d["tilt_angles_deg"] = tuple(d["tilt_angles_deg"])
        return cls(**d)


def _load_alpha_table() -> dict[float, float]:
    text = resources.files("icbench").joinpath("data/cu_attenuation.json").read_text()
    table = json.loads(text)
    return {float(line["energy_ev"]): float(line["alpha_per_um"]) for line in table["lines"]}


def calibrate_alpha(energies_ev: list[float] | tuple[float, ...]) -> list[float]:
    """Linear attenuation coefficients (1/um) for copper at bulk density,
    from the bundled lookup table.  Energies absent from the table are a
    configuration error."""
    table = _load_alpha_table()
    alphas = []
    for e in energies_ev:
        if float(e) not in table:
            raise ConfigError(f"no attenuation entry for {e} eV; table covers {sorted(table)}")
        alphas.append(table[float(e)])
    return alphas


@dataclass(frozen=True)
class SpectralLine:
    energy_ev: float
    weight: float
    alpha_per_um: float
    detector_efficiency: float = 1.0


@dataclass(frozen=True)
class Spectrum:
    lines: tuple[SpectralLine, ...]
    photons_per_ray: float = 1000.0

    def __post_init__(self):
        if not self.lines:
            raise ConfigError("spectrum needs at least one line")
        w = sum(line.weight for line in self.lines)
        if abs(w - 1.0) > 1e-9:
            raise ConfigError(f"line weights must sum to 1, got {w}")
        if any(line.alpha_per_um <= 0 for line in self.lines):
            raise ConfigError("attenuation coefficients must be positive")
        if self.photons_per_ray <= 0:
            raise ConfigError("photons_per_ray must be positive")

    def with_photons(self, n: float) -> "Spectrum":
        return Spectrum(lines=self.lines, photons_per_ray=n)

    def to_dict(self) -> dict:
        return {
            "photons_per_ray": self.photons_per_ray,
            "lines": [asdict(line) for line in self.lines],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Spectrum":
        lines = tuple(SpectralLine(**line) for line in d["lines"])
        return cls(lines=lines, photons_per_ray=float(d["photons_per_ray"]))


def default_geometry() -> Geometry:
    return Geometry()


def default_spectrum(photons_per_ray: float = 1000.0) -> Spectrum:
    energies = (9362.0, 9442.0)
    a1, a2 = calibrate_alpha(energies)
    return Spectrum(
        lines=(
            SpectralLine(energy_ev=energies[0], weight=0.5, alpha_per_um=a1),
            SpectralLine(energy_ev=energies[1], weight=0.5, alpha_per_um=a2),
        ),
        photons_per_ray=photons_per_ray,
    )
