"""Workspace orchestration: dataset generation, simulation, reconstruction,
export/import at the refiner boundary, scoring, and sweep aggregation.

A workspace directory holds a manifest.json plus per-stage subdirectories:

    circuits/c<idx>.cfv                 shared ground truth (per master seed)
    radiographs/<cond>/s<idx>.rad       one radiograph set per condition
    recon/<cond>/s<idx>.rec             ML approximants
    refined/<cond>/<method>/s<idx>.rec  imported refiner outputs
    reports/<cond>-<method>.json        BER reports
    sweep.json                          accumulated sweep rows

Conditions are identified by a hash of their canonicalized configuration so
artifacts from different conditions can never be mixed up.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ber as ber_mod
from .circuits import BinaryVolume, CircuitParams, generate_circuit, sample_seeds
from .detection import Measurements, expected_counts, sample_measurements
from .errors import ConfigError, DomainError
from .formats import (
    atomic_write_json,
    read_cfv,
    read_json,
    read_rad,
    read_rec,
    write_cfv,
    write_rad,
    write_rec,
)
from .geometry import Geometry, Spectrum, default_geometry, default_spectrum
from .projector import SystemMatrix, build_system_matrix
from .recon import SolverConfig, reconstruct_ml

__all__ = [
    "Condition",
    "Workspace",
    "METHODS",
    "condition_hash",
    "plot_rows",
]

METHODS = ("ml", "gen-baseline", "gen-axial", "gen-scatter", "gen-axial-scatter")


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def condition_hash(config: dict) -> str:
    return hashlib.sha256(_canonical(config).encode()).hexdigest()[:12]


@dataclass(frozen=True)
class Condition:
    photons_per_ray: float
    geometry: Geometry = field(default_factory=default_geometry)
    spectrum: Spectrum = field(default_factory=default_spectrum)
    train: int = 1800
    test: int = 200
    master_seed: int = 0
    method: str = "ml"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.photons_per_ray <= 0:
            raise ConfigError("photons_per_ray must be positive")
        # normalize so int and float budgets hash identically
        object.__setattr__(self, "photons_per_ray", float(self.photons_per_ray))
        if self.train < 0 or self.test < 1:
            raise ConfigError("need train >= 0 and test >= 1")

    def config_dict(self) -> dict:
        return {
            "photons_per_ray": self.photons_per_ray,
            "geometry": self.geometry.to_dict(),
            "spectrum": self.spectrum.with_photons(self.photons_per_ray).to_dict(),
            "master_seed": self.master_seed,
        }

    @property
    def hash(self) -> str:
        return condition_hash(self.config_dict())


# module-level state for worker processes (system matrix is immutable)
_WORKER: dict = {}


def _worker_init(geometry_dict: dict):
    geom = Geometry.from_dict(geometry_dict)
    _WORKER["A"] = build_system_matrix(geom)


def _worker_reconstruct(args) -> tuple[str, str | None]:
    """Returns (rec_path, error message or None); failures do not stop the run."""
    rad_path, rec_path, spectrum_dict, solver_dict, provenance = args
    A = _WORKER["A"]
    counts, _ = read_rad(rad_path)
    flat = counts.ravel(order="C")
    spectrum = Spectrum.from_dict(spectrum_dict)
    meas = Measurements(counts=flat, expectation=np.zeros_like(flat))
    try:
        approx = reconstruct_ml(meas, A, spectrum, SolverConfig(**solver_dict))
    except DomainError as exc:
        return rec_path, str(exc)
    approx.provenance.update(provenance)
    write_rec(rec_path, approx)
    return rec_path, None


class Workspace:
    """File-backed pipeline state rooted at a directory."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self._system_matrices: dict[tuple, SystemMatrix] = {}

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    def load_manifest(self) -> dict:
        if not self.manifest_path.exists():
            raise ConfigError(f"no manifest at {self.manifest_path}; run `gen` first")
        return read_json(self.manifest_path)

    def save_manifest(self, manifest: dict) -> None:
        atomic_write_json(self.manifest_path, manifest)

    def system_matrix(self, geometry: Geometry) -> SystemMatrix:
        key = _canonical(geometry.to_dict())
        if key not in self._system_matrices:
            self._system_matrices[key] = build_system_matrix(geometry)
        return self._system_matrices[key]

    # ----- gen -----

    def generate(self, params: CircuitParams, train: int, test: int,
                 master_seed: int, force: bool = False) -> dict:
        """Write ground-truth circuits and a fresh manifest.  Idempotent for
        a fixed (params, master_seed); refuses to overwrite a manifest built
        from different settings unless forced."""
        count = train + test
        gen_config = {
            "circuit_params": vars(params) | {"seed": master_seed},
            "master_seed": master_seed,
            "counts": {"train": train, "test": test},
        }
        if self.manifest_path.exists() and not force:
            existing = self.load_manifest()
            for key, val in gen_config.items():
                if existing.get(key) != val:
                    raise ConfigError(
                        f"manifest at {self.manifest_path} was generated with different "
                        f"settings ({key} differs); use force to regenerate"
                    )
        seeds = sample_seeds(master_seed, count)
        samples = []
        for i in range(count):
            rel = f"circuits/c{i:06d}.cfv"
            vol = generate_circuit(params, seed=seeds[i])
            write_cfv(self.root / rel, vol)
            samples.append({
                "index": i,
                "split": "train" if i < train else "test",
                "seed": seeds[i],
                "circuit": rel,
                "radiographs": {},
                "approximants": {},
                "refined": {},
            })
        manifest = {"version": 1, **gen_config, "samples": samples, "conditions": {}}
        self.save_manifest(manifest)
        return manifest

    # ----- simulate -----

    def _register_condition(self, manifest: dict, cond: Condition) -> str:
        chash = cond.hash
        manifest.setdefault("conditions", {})[chash] = cond.config_dict()
        return chash

    def _noise_seed(self, master_seed: int, index: int, chash: str) -> int:
        ss = np.random.SeedSequence(
            entropy=master_seed, spawn_key=(0x52AD, index, int(chash, 16))
        )
        return int(ss.generate_state(1, np.uint64)[0])

    def simulate(self, cond: Condition) -> list[str]:
        """One radiograph set per circuit at the condition's photon budget."""
        manifest = self.load_manifest()
        chash = self._register_condition(manifest, cond)
        geom = cond.geometry
        spectrum = cond.spectrum.with_photons(cond.photons_per_ray)
        A = self.system_matrix(geom)
        written = []
        for sample in manifest["samples"]:
            vol = read_cfv(self.root / sample["circuit"])
            if vol.dims != geom.dims:
                raise ConfigError(
                    f"circuit dims {vol.dims} do not match geometry {geom.dims}"
                )
            g0 = expected_counts(A, vol.values, spectrum)
            seed = self._noise_seed(manifest["master_seed"], sample["index"], chash)
            meas = sample_measurements(g0, seed)
            counts = meas.counts.reshape((geom.n_angles, geom.nu, geom.nv), order="C")
            rel = f"radiographs/{chash}/s{sample['index']:06d}.rad"
            write_rad(self.root / rel, counts, geom.tilt_angles_deg)
            sample["radiographs"][chash] = rel
            written.append(rel)
        self.save_manifest(manifest)
        return written

    # ----- reconstruct -----

    def reconstruct(self, cond: Condition, solver: SolverConfig = SolverConfig(),
                    workers: int = 1) -> list[str]:
        manifest = self.load_manifest()
        chash = cond.hash
        if chash not in manifest.get("conditions", {}):
            raise ConfigError(f"condition {chash} has no simulated radiographs yet")
        geom = cond.geometry
        spectrum = cond.spectrum.with_photons(cond.photons_per_ray)
        tasks = []
        for sample in manifest["samples"]:
            rad_rel = sample["radiographs"].get(chash)
            if rad_rel is None:
                raise ConfigError(f"sample {sample['index']} lacks radiographs for {chash}")
            rec_rel = f"recon/{chash}/s{sample['index']:06d}.rec"
            provenance = {
                "condition_hash": chash,
                "sample_index": sample["index"],
                "photons_per_ray": cond.photons_per_ray,
            }
            tasks.append((
                str(self.root / rad_rel), str(self.root / rec_rel),
                spectrum.to_dict(), vars(solver), provenance,
            ))
            sample["approximants"][chash] = rec_rel
        failures = []
        if workers > 1:
            with ProcessPoolExecutor(
                max_workers=workers, initializer=_worker_init,
                initargs=(geom.to_dict(),),
            ) as pool:
                results = list(pool.map(_worker_reconstruct, tasks))
        else:
            _WORKER["A"] = self.system_matrix(geom)
            results = [_worker_reconstruct(task) for task in tasks]
        for rec_path, error in results:
            if error is not None:
                failures.append({"path": rec_path, "error": error})
        if failures:
            manifest.setdefault("solver_failures", []).extend(failures)
        self.save_manifest(manifest)
        return [t[1] for t in tasks]

    # ----- export / import -----

    def export(self, cond: Condition, dest: Path | str, split: str = "both") -> dict:
        """Self-contained training container: paired approximant/ground-truth
        files plus an index the refiner reads."""
        manifest = self.load_manifest()
        chash = cond.hash
        dest = Path(dest)
        pairs = []
        splits = {"train": [], "test": []}
        missing = []
        for sample in manifest["samples"]:
            if split != "both" and sample["split"] != split:
                continue
            rec_rel = sample["approximants"].get(chash)
            if rec_rel is None or not (self.root / rec_rel).exists():
                missing.append(sample["index"])
                continue
            idx = sample["index"]
            a_rel = f"a{idx:06d}.rec"
            g_rel = f"g{idx:06d}.cfv"
            write_rec(dest / a_rel, read_rec(self.root / rec_rel))
            write_cfv(dest / g_rel, read_cfv(self.root / sample["circuit"]))
            pairs.append({
                "index": idx, "split": sample["split"],
                "approximant": a_rel, "ground_truth": g_rel,
            })
            splits[sample["split"]].append(idx)
        if missing:
            raise DomainError(f"export incomplete; missing approximants for samples {missing}")
        index = {
            "condition_hash": chash,
            "condition": cond.config_dict(),
            "dims": list(cond.geometry.dims),
            "pairs": pairs,
            "splits": splits,
        }
        atomic_write_json(dest / "index.json", index)
        return index

    def import_refined(self, cond: Condition, src: Path | str, method: str) -> list[str]:
        """Register refiner outputs (r<idx>.rec files) under a method tag."""
        if method == "ml":
            raise ConfigError("refined volumes cannot be registered as method 'ml'")
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r}")
        manifest = self.load_manifest()
        chash = cond.hash
        src = Path(src)
        report_path = src / "index.json"
        if report_path.exists():
            src_hash = read_json(report_path).get("condition_hash")
            if src_hash and src_hash != chash:
                raise ConfigError(
                    f"refined volumes were produced for condition {src_hash}, not {chash}"
                )
        registered = []
        for sample in manifest["samples"]:
            idx = sample["index"]
            cand = src / f"r{idx:06d}.rec"
            if not cand.exists():
                continue
            rel = f"refined/{chash}/{method}/s{idx:06d}.rec"
            write_rec(self.root / rel, read_rec(cand))
            sample["refined"][f"{chash}:{method}"] = rel
            registered.append(rel)
        if not registered:
            raise DomainError(f"no refined volumes (r<idx>.rec) found in {src}")
        self.save_manifest(manifest)
        return registered

    # ----- eval / sweep -----

    def _volume_for(self, sample: dict, chash: str, method: str) -> Path | None:
        if method == "ml":
            rel = sample["approximants"].get(chash)
        else:
            rel = sample["refined"].get(f"{chash}:{method}")
        return self.root / rel if rel else None

    def evaluate(self, cond: Condition, method: str = "ml",
                 include_train: bool = False) -> ber_mod.BerReport:
        """Score the test split; scoring training samples is refused."""
        if include_train:
            raise DomainError("evaluation must not touch the training split")
        manifest = self.load_manifest()
        chash = cond.hash
        approxs, truths = [], []
        for sample in manifest["samples"]:
            if sample["split"] != "test":
                continue
            path = self._volume_for(sample, chash, method)
            if path is None or not path.exists():
                raise DomainError(
                    f"sample {sample['index']} has no {method} volume for condition {chash}"
                )
            approxs.append(read_rec(path))
            truths.append(read_cfv(self.root / sample["circuit"]))
        model = ber_mod.fit_class_pdfs(approxs, truths)
        t = ber_mod.decision_threshold(model)
        report = ber_mod.error_rates(
            approxs, truths, model, t,
            condition={
                "photons_per_ray": cond.photons_per_ray,
                "method": method,
                "condition_hash": chash,
                "n_test": len(approxs),
            },
        )
        reports_dir = self.root / "reports"
        atomic_write_json(reports_dir / f"{chash}-{method}.json", report.to_dict())
        self._append_sweep_row(report)
        return report

    def _append_sweep_row(self, report: ber_mod.BerReport) -> None:
        path = self.root / "sweep.json"
        rows = read_json(path) if path.exists() else []
        rows.append(report.to_dict())
        atomic_write_json(path, rows)

    def sweep_rows(self) -> list[dict]:
        path = self.root / "sweep.json"
        if not path.exists():
            return []
        reports = []
        for d in read_json(path):
            d = dict(d)
            d["per_sample_errors"] = tuple(d.get("per_sample_errors", ()))
            reports.append(ber_mod.BerReport(**d))
        return ber_mod.sweep_summary(reports)


def plot_rows(summary: list[dict]) -> list[dict]:
    """Plot-ready rows with the single-error reference and transition flags
    (mean BER crossing one error per sample between adjacent budgets)."""
    rows = [dict(r, single_error_line=ber_mod.SINGLE_ERROR_LINE) for r in summary
            if r["photons_per_ray"] is not None and r["method"]]
    by_method: dict[str, list[dict]] = {}
    for r in rows:
        r["transition"] = False
        by_method.setdefault(r["method"], []).append(r)
    for method_rows in by_method.values():
        method_rows.sort(key=lambda r: r["photons_per_ray"])
        for prev, cur in zip(method_rows, method_rows[1:]):
            above = prev["mean_ber"] > ber_mod.SINGLE_ERROR_LINE
            below = cur["mean_ber"] <= ber_mod.SINGLE_ERROR_LINE
            if above and below:
                cur["transition"] = True
    return rows
