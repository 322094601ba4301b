import hashlib
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

import icbench as ib
from icbench.cli import main
from icbench.formats import read_cfv, read_json, read_rad, read_rec, write_rec
from icbench.pipeline import METHODS, plot_rows
from icbench.recon import SolverConfig


TINY_CFG = {
    "circuit_params": {"nx": 4, "ny": 4, "nz": 2, "p_w": 0.75, "p_x": 0.8, "p_y": 0.8, "p_z": 0.5},
    "geometry": {
        "nx": 4, "ny": 4, "nz": 2,
        "dx": 0.15, "dy": 0.15, "dz": 0.30,
        "source_sample_distance": 10.0,
        "magnification": 5000.0,
        "nu": 8, "nv": 8,
        "pixel_pitch": 420.0,
        "tilt_angles_deg": [-30.0, -15.0, 0.0, 15.0],
    },
    "spectrum": {
        "photons_per_ray": 1000.0,
        "lines": [
            {"energy_ev": 9362.0, "weight": 0.5, "alpha_per_um": 0.1372, "detector_efficiency": 1.0},
            {"energy_ev": 9442.0, "weight": 0.5, "alpha_per_um": 0.1337, "detector_efficiency": 1.0},
        ],
    },
    "counts": {"train": 3, "test": 2},
    "solver": {"init_value": 0.5, "max_iterations": 300, "rel_tolerance": 1e-09},
}


@pytest.fixture()
def tiny_config(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY_CFG))
    return str(path)


def _tiny_condition(photons, seed=0):
    return ib.Condition(
        photons_per_ray=photons,
        geometry=ib.Geometry.from_dict(TINY_CFG["geometry"]),
        spectrum=ib.Spectrum.from_dict(TINY_CFG["spectrum"]),
        train=3, test=2, master_seed=seed,
    )


@pytest.fixture()
def tiny_workspace(tmp_path, tiny_config):
    out = tmp_path / "ws"
    assert main(["gen", "--out", str(out), "--config", tiny_config, "--seed", "0"]) == 0
    return out


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_gen_writes_circuits_and_manifest(tiny_workspace):
    manifest = read_json(tiny_workspace / "manifest.json")
    assert len(manifest["samples"]) == 5
    splits = [s["split"] for s in manifest["samples"]]
    assert splits == ["train"] * 3 + ["test"] * 2
    for s in manifest["samples"]:
        vol = read_cfv(tiny_workspace / s["circuit"])
        assert vol.dims == (4, 4, 2)
        assert set(np.unique(vol.values)) <= {0, 1}


def test_gen_is_idempotent(tiny_workspace, tiny_config):
    hashes = {p.name: _sha(p) for p in (tiny_workspace / "circuits").iterdir()}
    assert main(["gen", "--out", str(tiny_workspace), "--config", tiny_config, "--seed", "0"]) == 0
    after = {p.name: _sha(p) for p in (tiny_workspace / "circuits").iterdir()}
    assert after == hashes


def test_gen_refuses_mismatched_manifest_without_force(tiny_workspace, tiny_config):
    rc = main(["gen", "--out", str(tiny_workspace), "--config", tiny_config, "--seed", "1"])
    assert rc == 2
    rc = main(["gen", "--out", str(tiny_workspace), "--config", tiny_config, "--seed", "1", "--force"])
    assert rc == 0
    assert read_json(tiny_workspace / "manifest.json")["master_seed"] == 1


def test_simulate_deterministic_and_condition_scoped(tiny_workspace, tiny_config):
    base = ["--out", str(tiny_workspace), "--config", tiny_config, "--seed", "0"]
    assert main(["simulate", *base, "--photons", "640"]) == 0
    cond = _tiny_condition(640)
    rad_dir = tiny_workspace / "radiographs" / cond.hash
    first = {p.name: _sha(p) for p in rad_dir.iterdir()}
    assert len(first) == 5
    assert main(["simulate", *base, "--photons", "640"]) == 0
    assert {p.name: _sha(p) for p in rad_dir.iterdir()} == first  # byte-identical rerun
    assert main(["simulate", *base, "--photons", "320"]) == 0
    other = tiny_workspace / "radiographs" / _tiny_condition(320).hash
    assert other.exists() and other != rad_dir


def test_radiograph_counts_reflect_attenuation(tiny_workspace, tiny_config):
    base = ["--out", str(tiny_workspace), "--config", tiny_config, "--seed", "0"]
    assert main(["simulate", *base, "--photons", "10000"]) == 0
    cond = _tiny_condition(10000)
    counts, angles = read_rad(tiny_workspace / "radiographs" / cond.hash / "s000000.rad")
    assert counts.shape == (4, 8, 8)
    np.testing.assert_array_equal(angles, TINY_CFG["geometry"]["tilt_angles_deg"])
    # rays that miss the object land at the full budget, give or take noise
    assert counts.max() <= 10000 + 5 * np.sqrt(10000)
    assert counts.min() >= 0


def test_full_pipeline_round_trip_and_refined_identity(tiny_workspace, tiny_config, tmp_path):
    base = ["--out", str(tiny_workspace), "--config", tiny_config, "--seed", "0"]
    assert main(["simulate", *base, "--photons", "2000"]) == 0
    assert main(["reconstruct", *base, "--photons", "2000"]) == 0
    cond = _tiny_condition(2000)
    rec_dir = tiny_workspace / "recon" / cond.hash
    assert len(list(rec_dir.glob("*.rec"))) == 5
    prov = read_rec(rec_dir / "s000000.rec").provenance
    assert prov["condition_hash"] == cond.hash

    assert main(["eval", *base, "--photons", "2000"]) == 0
    report = read_json(tiny_workspace / "reports" / f"{cond.hash}-ml.json")
    assert report["condition"]["n_test"] == 2
    assert 0.0 <= report["eta_avg"] <= 0.5

    dest = tmp_path / "container"
    assert main(["export", *base, "--photons", "2000", "--dest", str(dest)]) == 0
    index = read_json(dest / "index.json")
    assert index["condition_hash"] == cond.hash
    assert len(index["pairs"]) == 5
    assert index["splits"] == {"train": [0, 1, 2], "test": [3, 4]}
    for pair in index["pairs"]:
        a = read_rec(dest / pair["approximant"])
        g = read_cfv(dest / pair["ground_truth"])
        assert a.values.shape == g.values.shape == (4, 4, 2)

    # identity refinement: re-import the exported approximants unchanged
    for pair in index["pairs"]:
        write_rec(dest / f"r{pair['index']:06d}.rec", read_rec(dest / pair["approximant"]))
    assert main(["import-refined", *base, "--photons", "2000",
                 "--src", str(dest), "--method", "gen-baseline"]) == 0
    assert main(["eval", *base, "--photons", "2000", "--method", "gen-baseline"]) == 0
    refined = read_json(tiny_workspace / "reports" / f"{cond.hash}-gen-baseline.json")
    assert refined["eta_avg"] == report["eta_avg"]
    assert refined["per_sample_errors"] == report["per_sample_errors"]


def test_export_train_split_only(tiny_workspace, tiny_config, tmp_path):
    base = ["--out", str(tiny_workspace), "--config", tiny_config, "--seed", "0"]
    assert main(["simulate", *base, "--photons", "2000"]) == 0
    assert main(["reconstruct", *base, "--photons", "2000"]) == 0
    dest = tmp_path / "train-only"
    assert main(["export", *base, "--photons", "2000", "--dest", str(dest), "--split", "train"]) == 0
    index = read_json(dest / "index.json")
    assert [p["split"] for p in index["pairs"]] == ["train"] * 3
    assert index["splits"]["test"] == []


def test_import_refined_rejects_wrong_condition(tiny_workspace, tiny_config, tmp_path):
    base = ["--out", str(tiny_workspace), "--config", tiny_config, "--seed", "0"]
    assert main(["simulate", *base, "--photons", "2000"]) == 0
    assert main(["reconstruct", *base, "--photons", "2000"]) == 0
    dest = tmp_path / "container"
    assert main(["export", *base, "--photons", "2000", "--dest", str(dest)]) == 0
    index = read_json(dest / "index.json")
    for pair in index["pairs"]:
        shutil.copy(dest / pair["approximant"], dest / f"r{pair['index']:06d}.rec")
    # claim the container belongs to a different condition
    index["condition_hash"] = "0" * 12
    (dest / "index.json").write_text(json.dumps(index))
    rc = main(["import-refined", *base, "--photons", "2000",
               "--src", str(dest), "--method", "gen-baseline"])
    assert rc == 2


def test_import_refined_rejects_ml_tag(tiny_workspace):
    ws = ib.Workspace(tiny_workspace)
    with pytest.raises(ib.ConfigError):
        ws.import_refined(_tiny_condition(2000), tiny_workspace, "ml")
    with pytest.raises(ib.ConfigError):
        ws.import_refined(_tiny_condition(2000), tiny_workspace, "nonsense")


def test_evaluate_refuses_training_split(tiny_workspace, tiny_config):
    base = ["--out", str(tiny_workspace), "--config", tiny_config, "--seed", "0"]
    assert main(["simulate", *base, "--photons", "2000"]) == 0
    assert main(["reconstruct", *base, "--photons", "2000"]) == 0
    ws = ib.Workspace(tiny_workspace)
    with pytest.raises(ib.DomainError):
        ws.evaluate(_tiny_condition(2000), include_train=True)


def test_eval_before_reconstruct_is_domain_error(tiny_workspace, tiny_config):
    base = ["--out", str(tiny_workspace), "--config", tiny_config, "--seed", "0"]
    rc = main(["eval", *base, "--photons", "999"])
    assert rc == 1


def test_reconstruct_before_simulate_is_config_error(tiny_workspace, tiny_config):
    base = ["--out", str(tiny_workspace), "--config", tiny_config, "--seed", "0"]
    rc = main(["reconstruct", *base, "--photons", "999"])
    assert rc == 2


def test_missing_manifest_is_config_error(tmp_path, tiny_config):
    rc = main(["simulate", "--out", str(tmp_path / "empty"), "--config", tiny_config,
               "--seed", "0", "--photons", "640"])
    assert rc == 2


def test_ground_truth_shared_across_conditions(tiny_workspace, tiny_config):
    base = ["--out", str(tiny_workspace), "--config", tiny_config, "--seed", "0"]
    before = {p.name: _sha(p) for p in (tiny_workspace / "circuits").iterdir()}
    for photons in ("320", "640"):
        assert main(["simulate", *base, "--photons", photons]) == 0
    after = {p.name: _sha(p) for p in (tiny_workspace / "circuits").iterdir()}
    assert after == before
    manifest = read_json(tiny_workspace / "manifest.json")
    assert len(manifest["conditions"]) == 2


def test_parallel_reconstruction_matches_serial(tiny_workspace, tiny_config):
    base = ["--out", str(tiny_workspace), "--config", tiny_config, "--seed", "0"]
    assert main(["simulate", *base, "--photons", "2000"]) == 0
    cond = _tiny_condition(2000)
    ws = ib.Workspace(tiny_workspace)
    solver = SolverConfig(**TINY_CFG["solver"])
    ws.reconstruct(cond, solver, workers=1)
    serial = {p.name: _sha(p) for p in (tiny_workspace / "recon" / cond.hash).glob("*.rec")}
    shutil.rmtree(tiny_workspace / "recon")
    ws.reconstruct(cond, solver, workers=2)
    parallel = {p.name: _sha(p) for p in (tiny_workspace / "recon" / cond.hash).glob("*.rec")}
    assert parallel == serial


def test_sweep_command_and_plotdata(tiny_workspace, tiny_config, tmp_path, capsys):
    base = ["--out", str(tiny_workspace), "--config", tiny_config, "--seed", "0"]
    assert main(["sweep", *base, "--photons", "320,2000"]) == 0
    ws = ib.Workspace(tiny_workspace)
    rows = ws.sweep_rows()
    assert {r["photons_per_ray"] for r in rows} == {320.0, 2000.0}
    assert all(r["method"] == "ml" for r in rows)

    csv_path = tmp_path / "plot.csv"
    json_path = tmp_path / "plot.json"
    assert main(["plotdata", *base, "--csv", str(csv_path), "--json", str(json_path)]) == 0
    plotted = read_json(json_path)
    assert len(plotted) == 2
    for row in plotted:
        assert row["single_error_line"] == pytest.approx(1 / 2048)
        assert "transition" in row
    header = csv_path.read_text().splitlines()[0]
    assert header == "photons_per_ray,method,mean_ber,stderr,n_repeats"


def test_plotdata_without_sweep_is_domain_error(tiny_workspace, tiny_config):
    rc = main(["plotdata", "--out", str(tiny_workspace), "--config", tiny_config, "--seed", "0"])
    assert rc == 1


def test_plot_rows_flags_single_error_transition():
    def row(photons, ber):
        return {"photons_per_ray": photons, "method": "ml", "mean_ber": ber,
                "stderr": None, "n_repeats": 1}

    rows = plot_rows([row(320, 0.2), row(640, 0.01), row(1280, 1 / 4096), row(5000, 0.0)])
    flags = {r["photons_per_ray"]: r["transition"] for r in rows}
    assert flags == {320: False, 640: False, 1280: True, 5000: False}


def test_condition_hash_stability_and_sensitivity():
    a = _tiny_condition(640)
    b = _tiny_condition(640)
    assert a.hash == b.hash and len(a.hash) == 12
    assert a.hash != _tiny_condition(641).hash
    assert a.hash != _tiny_condition(640, seed=1).hash


def test_condition_validation():
    with pytest.raises(ib.ConfigError):
        ib.Condition(photons_per_ray=0.0)
    with pytest.raises(ib.ConfigError):
        ib.Condition(photons_per_ray=640.0, method="bogus")
    assert set(METHODS) == {"ml", "gen-baseline", "gen-axial", "gen-scatter", "gen-axial-scatter"}


def test_unknown_config_path_is_config_error(tmp_path):
    rc = main(["gen", "--out", str(tmp_path / "ws"), "--config",
               str(tmp_path / "missing.json"), "--seed", "0"])
    assert rc == 2


def test_bundled_desk_profile_runs(tmp_path):
    out = tmp_path / "desk"
    base = ["--out", str(out), "--desk-scale", "--seed", "0", "--train", "2", "--test", "1"]
    assert main(["gen", *base]) == 0
    manifest = read_json(out / "manifest.json")
    assert len(manifest["samples"]) == 3
    vol = read_cfv(out / manifest["samples"][0]["circuit"])
    assert vol.dims == (16, 16, 8)
