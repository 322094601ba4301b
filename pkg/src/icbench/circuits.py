"""Procedural generation of random binary voxel circuits.

Volumes are numpy uint8 arrays of shape (nx, ny, nz), indexed 0-based as
arr[i1-1, i2-1, i3-1] for the 1-based domain indices (i1, i2, i3).  Flat
storage order is i1-fastest, i.e. ``arr.ravel(order="F")``.

Generation runs in two rounds:
  round 1: every site with i1, i2, i3 all odd is a wire seed, set to 1
           with probability p_w;
  round 2: a single sweep in increasing (i3, i2, i1) order grows wires:
           x layers extend from the -i1 neighbor with probability p_x,
           y layers from the -i2 neighbor with p_y, via layers from the
           -i3 neighbor with p_z.  Growth cascades within the sweep.

All randomness comes from two pre-drawn uniform fields (one per round)
with a fixed per-voxel layout, so results are independent of iteration
schedule and raising any probability with the same draws never turns a
1 into a 0.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "CircuitParams",
    "BinaryVolume",
    "LayerKind",
    "layer_kind_of",
    "generate_circuit",
    "grow_from_uniforms",
    "copper_statistics",
    "OccupancySummary",
]


class LayerKind(enum.Enum):
    X_WIRING = "x"
    Y_WIRING = "y"
    VIA = "via"


@dataclass(frozen=True)
class CircuitParams:
    nx: int = 16
    ny: int = 16
    nz: int = 8
    p_w: float = 0.75
    p_x: float = 0.8
    p_y: float = 0.8
    p_z: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise DomainError(f"voxel counts must be >= 1, got {(self.nx, self.ny, self.nz)}")
        for name in ("p_w", "p_x", "p_y", "p_z"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise DomainError(f"{name}={p} outside [0, 1]")

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def n_voxels(self) -> int:
        return self.nx * self.ny * self.nz


@dataclass
class BinaryVolume:
    values: np.ndarray  # uint8, shape (nx, ny, nz), entries in {0, 1}

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.uint8)
        if self.values.ndim != 3:
            raise DomainError("BinaryVolume expects a 3-d array")
        if not np.isin(self.values, (0, 1)).all():
            raise DomainError("BinaryVolume entries must be 0 or 1")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape

    def copper_fraction(self) -> float:
        return float(self.values.mean())


def layer_kind_of(i3: int, nz: int) -> LayerKind:
    """Classify a 1-based layer index: i3 = 1 mod 4 -> x wiring,
    i3 = 3 mod 4 -> y wiring, even i3 -> via."""
    if not 1 <= i3 <= nz:
        raise DomainError(f"layer index {i3} outside 1..{nz}")
    if i3 % 2 == 0:
        return LayerKind.VIA
    if i3 % 4 == 1:
        return LayerKind.X_WIRING
    return LayerKind.Y_WIRING


def grow_from_uniforms(u1: np.ndarray, u2: np.ndarray, params: CircuitParams) -> np.ndarray:
    """Apply the two-round rules with explicit uniform draws.

    u1 and u2 have shape (nx, ny, nz); u1[v] decides the round-1 seed at
    voxel v, u2[v] the round-2 growth draw at v.  Exposed separately so
    coupled-randomness properties (monotonicity in the probabilities)
    are testable.
    """
    nx, ny, nz = params.dims
    vol = np.zeros((nx, ny, nz), dtype=np.uint8)

    # round 1: seeds at all-odd (1-based) sites, i.e. even 0-based indices
    sl = (slice(0, None, 2),) * 3
    vol[sl] = (u1[sl] < params.p_w).astype(np.uint8)

    # round 2: one sweep in increasing (i3, i2, i1)
    for k in range(nz):
        kind = layer_kind_of(k + 1, nz)
        if kind is LayerKind.X_WIRING:
            for i in range(1, nx):
                grow = (vol[i - 1, :, k] == 1) & (u2[i, :, k] < params.p_x)
                vol[i, :, k] |= grow.astype(np.uint8)
        elif kind is LayerKind.Y_WIRING:
            for j in range(1, ny):
                grow = (vol[:, j - 1, k] == 1) & (u2[:, j, k] < params.p_y)
                vol[:, j, k] |= grow.astype(np.uint8)
        else:  # via: depends only on the already-final layer below
            grow = (vol[:, :, k - 1] == 1) & (u2[:, :, k] < params.p_z)
            vol[:, :, k] |= grow.astype(np.uint8)
    return vol


def generate_circuit(params: CircuitParams, seed: int | None = None) -> BinaryVolume:
    """Draw one random circuit.  Deterministic given (params, seed);
    seed=None uses params.seed."""
    rng = np.random.default_rng(params.seed if seed is None else seed)
    shape = params.dims
    u1 = rng.random(shape)
    u2 = rng.random(shape)
    return BinaryVolume(grow_from_uniforms(u1, u2, params))


def sample_seeds(master_seed: int, count: int) -> list[int]:
    """Per-sample generator seeds derived from a master seed."""
    ss = np.random.SeedSequence(master_seed)
    return [int(child.generate_state(1, np.uint64)[0]) for child in ss.spawn(count)]


@dataclass(frozen=True)
class OccupancySummary:
    p1: float
    stderr: float
    per_kind: dict[LayerKind, float]
    samples: int


def copper_statistics(samples: int, params: CircuitParams) -> OccupancySummary:
    """Monte-Carlo estimate of P(voxel = 1), overall and per layer kind."""
    if samples < 1:
        raise DomainError("samples must be >= 1")
    nx, ny, nz = params.dims
    kinds = np.array([layer_kind_of(k + 1, nz).value for k in range(nz)])
    fractions = np.empty(samples)
    kind_tot = {kind: 0.0 for kind in LayerKind}
    kind_cnt = {kind: 0 for kind in LayerKind}
    for i, seed in enumerate(sample_seeds(params.seed, samples)):
        vol = generate_circuit(params, seed=seed).values
        fractions[i] = vol.mean()
        for kind in LayerKind:
            mask = kinds == kind.value
            if mask.any():
                kind_tot[kind] += vol[:, :, mask].mean()
                kind_cnt[kind] += 1
    stderr = float(fractions.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
    per_kind = {
        kind: kind_tot[kind] / kind_cnt[kind] if kind_cnt[kind] else float("nan")
        for kind in LayerKind
    }
    return OccupancySummary(
        p1=float(fractions.mean()), stderr=stderr, per_kind=per_kind, samples=samples
    )
