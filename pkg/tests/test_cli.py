import json

import numpy as np
import pytest

from terrawind import io
from terrawind.cli import main

TINY_CONFIG = {
    "synth": {"seed": 2, "size": 32},
    "data": {"scenes": 2, "patch": 16, "stride": 16, "factor": 4},
    "schedule": {"T": 5},
    "model": {"layers": 2, "hidden_channels": 4},
    "train": {"iterations": 3, "batch_size": 2, "log_every": 0},
}


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(TINY_CONFIG))
    return str(path)


@pytest.fixture()
def generated(tmp_path, config_path):
    out = tmp_path / "data"
    assert main(["gen", "--config", config_path, "--out", str(out)]) == 0
    return out


@pytest.fixture()
def checkpoint(tmp_path, config_path, generated):
    out = str(tmp_path / "model.wsrm")
    assert main(["train", "--config", config_path, "--data", str(generated), "--out", out]) == 0
    return out


def test_gen_layout(generated, helpers):
    scene = generated / "scene_000"
    for name in ("truth", "sim", "terrain"):
        helpers.check_grid_file(scene / f"{name}.wsrg", 32, 32)
    helpers.check_grid_file(scene / "lr_sim.wsrg", 8, 8)
    assert len(io.read_stations(scene / "stations.csv")) == 6
    assert len(io.read_stations(scene / "holdout.csv")) == 4
    assert (generated / "scene_001").is_dir()
    metadata = io.read_metadata(generated / "metadata.json")
    assert metadata["command"] == "gen"
    assert metadata["config"]["synth"]["size"] == 32


def test_eval_truth_against_itself(generated, tmp_path):
    truth = str(generated / "scene_000" / "truth.wsrg")
    out = tmp_path / "report.csv"
    assert main(["eval", "--pred", truth, "--truth", truth, "--out", str(out)]) == 0
    report = io.read_report(out)
    assert report.mae == 0.0 and report.rmse == 0.0
    assert report.ssim == pytest.approx(1.0, abs=1e-12)
    assert (tmp_path / "report.txt").exists()
    cdf = (tmp_path / "report.cdf.csv").read_text().splitlines()
    assert cdf[0] == "prob,pred,truth" and len(cdf) == 10


def test_eval_on_holdout_pixels(generated, tmp_path):
    scene = generated / "scene_000"
    out = tmp_path / "holdout.csv"
    args = ["eval", "--pred", str(scene / "sim.wsrg"), "--truth", str(scene / "truth.wsrg")]
    assert main(args + ["--holdout", str(scene / "holdout.csv"), "--out", str(out)]) == 0
    assert io.read_report(out).n_pixels == 4


def test_train_outputs(checkpoint):
    model, sched = io.load_checkpoint(checkpoint)
    assert sched.T == 5 and model.use_terrain
    losses = open(checkpoint.replace(".wsrm", ".loss.csv")).read().splitlines()
    assert losses[0] == "iteration,loss" and len(losses) == 4


def test_assimilate_without_stations_matches_downscale(generated, checkpoint, tmp_path, helpers):
    scene = generated / "scene_000"
    empty = tmp_path / "none.csv"
    io.write_stations([], empty)
    common = ["--model", checkpoint, "--lr", str(scene / "lr_sim.wsrg"), "--terrain", str(scene / "terrain.wsrg")]
    plain, assimilated = tmp_path / "plain.wsrg", tmp_path / "da.wsrg"
    assert main(["downscale", *common, "--seed", "3", "--out", str(plain)]) == 0
    assert main(["assimilate", *common, "--stations", str(empty), "--seed", "3", "--out", str(assimilated)]) == 0
    helpers.check_grid_file(plain, 32, 32)
    assert plain.read_bytes() == assimilated.read_bytes()

    with_stations = tmp_path / "da_stations.wsrg"
    stations = ["--stations", str(scene / "stations.csv")]
    assert main(["assimilate", *common, *stations, "--seed", "3", "--out", str(with_stations)]) == 0
    assert with_stations.read_bytes() != plain.read_bytes()


def test_baseline(generated, tmp_path, helpers):
    out = tmp_path / "bicubic.wsrg"
    lr = str(generated / "scene_000" / "lr_sim.wsrg")
    assert main(["baseline", "--method", "bilinear", "--lr", lr, "--out", str(out)]) == 0
    helpers.check_grid_file(out, 32, 32)
    assert io.read_metadata(str(out) + ".meta.json")["command"] == "baseline"


def test_rerun_from_metadata(generated, checkpoint, tmp_path):
    again = tmp_path / "again"
    assert main(["gen", "--config", str(generated / "metadata.json"), "--out", str(again)]) == 0
    for name in ("truth.wsrg", "sim.wsrg", "terrain.wsrg", "stations.csv"):
        assert (again / "scene_001" / name).read_bytes() == (generated / "scene_001" / name).read_bytes()

    retrained = str(tmp_path / "retrained.wsrm")
    assert main(["train", "--config", checkpoint + ".meta.json", "--data", str(again), "--out", retrained]) == 0
    assert open(retrained, "rb").read() == open(checkpoint, "rb").read()


def test_unknown_config_key(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"synth": {"sizes": 64}}))
    assert main(["gen", "--config", str(path), "--out", str(tmp_path / "out")]) == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("terrawind: error=UnknownConfigKey message=")


def test_usage_error(capsys):
    assert main(["gen"]) == 2
    assert "error=UsageError" in capsys.readouterr().err
    assert main(["baseline", "--method", "nearest", "--lr", "x", "--out", "y"]) == 1


def test_missing_input(tmp_path, capsys):
    assert main(["baseline", "--lr", str(tmp_path / "missing.wsrg"), "--out", str(tmp_path / "o.wsrg")]) == 1
    assert "error=FileNotFoundError" in capsys.readouterr().err


def test_corrupt_grid(tmp_path, capsys):
    bad = tmp_path / "bad.wsrg"
    bad.write_bytes(b"JUNK" + bytes(40))
    assert main(["baseline", "--lr", str(bad), "--out", str(tmp_path / "o.wsrg")]) == 1
    assert "error=BadMagic" in capsys.readouterr().err
