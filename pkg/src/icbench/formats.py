"""Binary file formats for circuits, radiographs, and reconstructions.

CFV1: magic b"CFV1", little-endian u32 nx, ny, nz, then nx*ny*nz bytes
      (0 or 1), i1 fastest.
RAD1: magic b"RAD1", u32 n_angles, nu, nv, f64 tilt angles (degrees),
      then f64 counts, angle-major with row-major (iu, iv) pixels.
REC1: magic b"REC1", u32 nx, ny, nz, f32 payload in CFV1 ordering; an
      optional JSON sidecar (<path>.json) carries solver provenance.

All writes go through a temp file and an atomic rename.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .circuits import BinaryVolume
from .errors import DomainError
from .recon import Approximant

__all__ = [
    "write_cfv", "read_cfv",
    "write_rad", "read_rad",
    "write_rec", "read_rec",
    "atomic_write_bytes", "atomic_write_json", "read_json",
]


def atomic_write_bytes(path: Path | str, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path: Path | str, obj) -> None:
    atomic_write_bytes(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode())


def read_json(path: Path | str):
    with open(path) as fh:
        return json.load(fh)


def _expect_magic(fh, magic: bytes, path) -> None:
    got = fh.read(4)
    if got != magic:
        raise DomainError(f"{path}: expected magic {magic!r}, found {got!r}")


def write_cfv(path: Path | str, volume: BinaryVolume) -> None:
    nx, ny, nz = volume.dims
    payload = struct.pack("<4sIII", b"CFV1", nx, ny, nz)
    payload += volume.values.ravel(order="F").astype(np.uint8).tobytes()
    atomic_write_bytes(path, payload)


def read_cfv(path: Path | str) -> BinaryVolume:
    with open(path, "rb") as fh:
        _expect_magic(fh, b"CFV1", path)
        nx, ny, nz = struct.unpack("<III", fh.read(12))
        raw = fh.read(nx * ny * nz)
    if len(raw) != nx * ny * nz:
        raise DomainError(f"{path}: truncated CFV1 payload")
    values = np.frombuffer(raw, dtype=np.uint8).reshape((nx, ny, nz), order="F")
    return BinaryVolume(values=values.copy())


def write_rad(path: Path | str, counts: np.ndarray, tilt_angles_deg) -> None:
    """counts has shape (n_angles, nu, nv)."""
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 3:
        raise DomainError("radiograph counts must be (n_angles, nu, nv)")
    n_angles, nu, nv = counts.shape
    angles = np.asarray(tilt_angles_deg, dtype=np.float64)
    if angles.size != n_angles:
        raise DomainError("tilt angle count does not match counts array")
    payload = struct.pack("<4sIII", b"RAD1", n_angles, nu, nv)
    payload += angles.tobytes()
    payload += counts.ravel(order="C").tobytes()
    atomic_write_bytes(path, payload)


def read_rad(path: Path | str) -> tuple[np.ndarray, np.ndarray]:
    """Returns (counts of shape (n_angles, nu, nv), tilt angles in degrees)."""
    with open(path, "rb") as fh:
        _expect_magic(fh, b"RAD1", path)
        n_angles, nu, nv = struct.unpack("<III", fh.read(12))
        angles = np.frombuffer(fh.read(8 * n_angles), dtype="<f8")
        raw = fh.read(8 * n_angles * nu * nv)
    if raw is None or len(raw) != 8 * n_angles * nu * nv:
        raise DomainError(f"{path}: truncated RAD1 payload")
    counts = np.frombuffer(raw, dtype="<f8").reshape((n_angles, nu, nv), order="C")
    return counts.copy(), angles.copy()


def write_rec(path: Path | str, approximant: Approximant) -> None:
    nx, ny, nz = approximant.dims
    payload = struct.pack("<4sIII", b"REC1", nx, ny, nz)
    payload += approximant.values.ravel(order="F").astype("<f4").tobytes()
    atomic_write_bytes(path, payload)
    if approximant.provenance:
        atomic_write_json(str(path) + ".json", approximant.provenance)


def read_rec(path: Path | str) -> Approximant:
    with open(path, "rb") as fh:
        _expect_magic(fh, b"REC1", path)
        nx, ny, nz = struct.unpack("<III", fh.read(12))
        raw = fh.read(4 * nx * ny * nz)
    if len(raw) != 4 * nx * ny * nz:
        raise DomainError(f"{path}: truncated REC1 payload")
    values = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape((nx, ny, nz), order="F")
    sidecar = Path(str(path) + ".json")
    provenance = read_json(sidecar) if sidecar.exists() else {}
    return Approximant(values=np.clip(values, 0.0, 1.0), provenance=provenance)
