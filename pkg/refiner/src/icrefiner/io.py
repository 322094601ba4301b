"""Readers and writers for the file boundary with the tomography pipeline.

The pipeline exports a training container: a directory with an index.json
plus paired files per sample,

    a<idx>.rec   continuous reconstruction  (REC1: magic, u32 dims, f32, i1 fastest)
    g<idx>.cfv   binary ground truth        (CFV1: magic, u32 dims, u8,  i1 fastest)

and consumes refined volumes written back as r<idx>.rec in the same REC1
layout, with an index.json carrying the condition hash for cross-checking.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

__all__ = ["Archive", "Pair", "read_cfv", "read_rec", "write_rec", "load_archive"]


def _read_header(raw: bytes, magic: bytes, path) -> tuple[int, int, int, bytes]:
    if raw[:4] != magic:
        raise DataError(f"{path}: expected magic {magic!r}, found {raw[:4]!r}")
    nx, ny, nz = struct.unpack("<III", raw[4:16])
    return nx, ny, nz, raw[16:]


def read_cfv(path: Path | str) -> np.ndarray:
    raw = Path(path).read_bytes()
    nx, ny, nz, body = _read_header(raw, b"CFV1", path)
    if len(body) < nx * ny * nz:
        raise DataError(f"{path}: truncated CFV1 payload")
    return np.frombuffer(body[: nx * ny * nz], dtype=np.uint8).reshape(
        (nx, ny, nz), order="F"
    ).copy()


def read_rec(path: Path | str) -> np.ndarray:
    raw = Path(path).read_bytes()
    nx, ny, nz, body = _read_header(raw, b"REC1", path)
    if len(body) < 4 * nx * ny * nz:
        raise DataError(f"{path}: truncated REC1 payload")
    values = np.frombuffer(body[: 4 * nx * ny * nz], dtype="<f4").reshape(
        (nx, ny, nz), order="F"
    )
    return np.clip(values.astype(np.float64), 0.0, 1.0)


def write_rec(path: Path | str, values: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    nx, ny, nz = values.shape
    payload = struct.pack("<4sIII", b"REC1", nx, ny, nz)
    payload += values.ravel(order="F").astype("<f4").tobytes()
    path.write_bytes(payload)


@dataclass(frozen=True)
class Pair:
    index: int
    split: str
    approximant: np.ndarray  # float in [0, 1]
    ground_truth: np.ndarray  # uint8 in {0, 1}


@dataclass(frozen=True)
class Archive:
    root: Path
    condition_hash: str
    dims: tuple[int, int, int]
    pairs: tuple[Pair, ...]

    def split(self, name: str) -> list[Pair]:
        return [p for p in self.pairs if p.split == name]


def load_archive(root: Path | str) -> Archive:
    root = Path(root)
    index_path = root / "index.json"
    if not index_path.exists():
        raise DataError(f"no index.json in {root}")
    index = json.loads(index_path.read_text())
    dims = tuple(index.get("dims", ()))
    pairs = []
    for entry in index.get("pairs", []):
        approx = read_rec(root / entry["approximant"])
        truth = read_cfv(root / entry["ground_truth"])
        if approx.shape != truth.shape or (dims and approx.shape != dims):
            raise DataError(
                f"pair {entry['index']}: shape {approx.shape} does not match "
                f"archive dims {dims}"
            )
        pairs.append(Pair(
            index=int(entry["index"]), split=entry["split"],
            approximant=approx, ground_truth=truth,
        ))
    if not pairs:
        raise DataError(f"archive {root} contains no pairs")
    return Archive(
        root=root,
        condition_hash=index.get("condition_hash", ""),
        dims=dims or pairs[0].approximant.shape,
        pairs=tuple(pairs),
    )
