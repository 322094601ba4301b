"""Sparse cone-beam system matrix by exact parametric voxel traversal.

Each row holds the intersection lengths (um) of one source-to-pixel ray
with every voxel it crosses.  Row order is angle-major, then detector
(iu, iv) in C order; column order is the i1-fastest flat voxel index,
matching ``values.ravel(order="F")`` for arrays of shape (nx, ny, nz).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .geometry import Geometry

__all__ = ["SystemMatrix", "build_system_matrix", "ray_endpoints", "trace_ray"]

_EPS = 1e-12


@dataclass
class SystemMatrix:
    matrix: sp.csr_matrix  # (n_rays, n_voxels), path lengths in um
    geometry: Geometry

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def project(self, volume: np.ndarray) -> np.ndarray:
        """Path length of material along every ray: A @ f."""
        return self.matrix @ np.asarray(volume, dtype=np.float64).ravel(order="F")

    def backproject(self, ray_values: np.ndarray) -> np.ndarray:
        """A^T r, reshaped to the volume grid."""
        flat = self.matrix.T @ np.asarray(ray_values, dtype=np.float64)
        g = self.geometry
        return flat.reshape((g.nx, g.ny, g.nz), order="F")

    def row_index(self, angle: int, iu: int, iv: int) -> int:
        g = self.geometry
        return (angle * g.nu + iu) * g.nv + iv


def ray_endpoints(geometry: Geometry, angle_idx: int, iu: int, iv: int) -> tuple[np.ndarray, np.ndarray]:
    """Source point and detector-pixel center in the object frame.

    The stage tilt rotates the object by theta about z; equivalently the
    static source/detector pair is rotated by -theta here.
    """
    g = geometry
    theta = np.deg2rad(g.tilt_angles_deg[angle_idx])
    src = np.array([0.0, -g.source_sample_distance, 0.0])
    u = (iu - (g.nu - 1) / 2) * g.pixel_pitch
    v = (iv - (g.nv - 1) / 2) * g.pixel_pitch
    det = np.array([u, g.source_detector_distance - g.source_sample_distance, v])
    c, s = np.cos(-theta), np.sin(-theta)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return rot @ src, rot @ det


def trace_ray(geometry: Geometry, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact ray-voxel intersection lengths for one ray.

    Returns (flat voxel indices, lengths in um); empty arrays when the
    ray misses the volume.
    """
    g = geometry
    lo = -np.array(g.extent)
    hi = np.array(g.extent)
    d = dst - src
    ray_len = float(np.linalg.norm(d))

    # slab clipping for the entry/exit parameters
    t0, t1 = 0.0, 1.0
    for ax in range(3):
        if abs(d[ax]) < _EPS:
            if src[ax] <= lo[ax] or src[ax] >= hi[ax]:
                return np.empty(0, dtype=np.int64), np.empty(0)
        else:
            ta = (lo[ax] - src[ax]) / d[ax]
            tb = (hi[ax] - src[ax]) / d[ax]
            t0 = max(t0, min(ta, tb))
            t1 = min(t1, max(ta, tb))
    if t1 <= t0:
        return np.empty(0, dtype=np.int64), np.empty(0)

    # parameters of every grid-plane crossing inside (t0, t1)
    ts = [np.array([t0, t1])]
    steps = (g.dx, g.dy, g.dz)
    counts = (g.nx, g.ny, g.nz)
    for ax in range(3):
        if abs(d[ax]) < _EPS:
            continue
        planes = lo[ax] + steps[ax] * np.arange(counts[ax] + 1)
        t = (planes - src[ax]) / d[ax]
        ts.append(t[(t > t0) & (t < t1)])
    t = np.unique(np.concatenate(ts))

    mids = src[None, :] + 0.5 * (t[:-1] + t[1:])[:, None] * d[None, :]
    idx = np.floor((mids - lo[None, :]) / np.array(steps)[None, :]).astype(np.int64)
    inside = np.all((idx >= 0) & (idx < np.array(counts)[None, :]), axis=1)
    seg = np.diff(t) * ray_len
    keep = inside & (seg > 0)
    idx = idx[keep]
    flat = idx[:, 0] + counts[0] * (idx[:, 1] + counts[1] * idx[:, 2])
    return flat, seg[keep]


def build_system_matrix(geometry: Geometry) -> SystemMatrix:
    """Trace one ray per (tilt angle, detector pixel) and assemble the
    sparse path-length matrix."""
    g = geometry
    if g.magnification <= 1:
        raise ConfigError("degenerate magnification")
    rows, cols, vals = [], [], []
    for a in range(g.n_angles):
        for iu in range(g.nu):
            for iv in range(g.nv):
                src, dst = ray_endpoints(g, a, iu, iv)
                flat, seg = trace_ray(g, src, dst)
                if flat.size:
                    row = (a * g.nu + iu) * g.nv + iv
                    rows.append(np.full(flat.size, row, dtype=np.int64))
                    cols.append(flat)
                    vals.append(seg)
    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
    else:
        rows = np.empty(0, dtype=np.int64)
        cols = np.empty(0, dtype=np.int64)
        vals = np.empty(0)
    mat = sp.csr_matrix(
        (vals, (rows, cols)), shape=(g.n_rays, g.n_voxels), dtype=np.float64
    )
    return SystemMatrix(matrix=mat, geometry=g)
