"""CLI surface: every subcommand exercised end-to-end at tiny scale."""

import json

import pytest
from click.testing import CliRunner

from lanelab.cli import main


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory, runner):
    """Record a small dataset and train a 1-epoch pilotnet once for the module."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "d.lrds"
    res = runner.invoke(
        main,
        ["dataset", "record", "--circuits", "oval,s_loop", "--laps", "1", "--seed", "3",
         "--out", str(data)],
    )
    assert res.exit_code == 0, res.output
    weights = root / "pilotnet.lrwt"
    history = root / "hist.json"
    res = runner.invoke(
        main,
        ["train", "--model", "pilotnet", "--data", str(data), "--epochs", "1",
         "--seed", "0", "--out", str(weights), "--history", str(history)],
    )
    assert res.exit_code == 0, res.output
    return root


def test_circuits_list(runner):
    res = runner.invoke(main, ["circuits", "list"])
    assert res.exit_code == 0
    lines = res.output.strip().splitlines()
    assert len(lines) == 7
    assert sum("TRAIN" in l for l in lines) == 4


def test_circuits_export(runner, tmp_path):
    out = tmp_path / "circuits"
    res = runner.invoke(main, ["circuits", "export", "--out", str(out)])
    assert res.exit_code == 0
    assert len(list(out.glob("*.yaml"))) == 7
    assert (out / "circuits.png").exists()


def test_dataset_record_and_train_artifacts(workspace):
    assert (workspace / "d.lrds").stat().st_size > 0
    assert (workspace / "pilotnet.lrwt").stat().st_size > 0
    doc = json.loads((workspace / "hist.json").read_text())
    assert len(doc["epochs"]) == 1
    assert (workspace / "hist.png").exists()


def test_dataset_export(runner, workspace, tmp_path):
    out = tmp_path / "frames"
    res = runner.invoke(
        main, ["dataset", "export", "--in", str(workspace / "d.lrds"), "--out", str(out)]
    )
    assert res.exit_code == 0
    assert (out / "labels.csv").exists()
    assert len(list(out.glob("*.ppm"))) > 0


def test_eval_internal(runner, workspace):
    res = runner.invoke(
        main,
        ["eval", "internal", "--model", "pilotnet", "--weights",
         str(workspace / "pilotnet.lrwt"), "--data", str(workspace / "d.lrds"),
         "--split", "val"],
    )
    assert res.exit_code == 0, res.output
    assert "MAE=" in res.output and "MSE=" in res.output


def test_eval_episode_expert(runner, tmp_path):
    out = tmp_path / "ep.json"
    res = runner.invoke(
        main,
        ["eval", "episode", "--model", "expert", "--circuit", "oval", "--seed", "2",
         "--out", str(out)],
    )
    assert res.exit_code == 0, res.output
    doc = json.loads(out.read_text())
    assert doc["completed"] is True


def test_eval_episode_neural(runner, workspace, tmp_path):
    out = tmp_path / "ep.json"
    res = runner.invoke(
        main,
        ["eval", "episode", "--model", "pilotnet", "--weights",
         str(workspace / "pilotnet.lrwt"), "--circuit", "oval", "--noise", "0.2",
         "--camera-offset", "left", "--seed", "2", "--out", str(out)],
    )
    assert res.exit_code == 0, res.output
    doc = json.loads(out.read_text())
    assert set(doc) >= {"completed", "failure_reason", "position_deviation_mae"}


def test_suite_robustness_expert(runner, tmp_path):
    out = tmp_path / "rob.json"
    res = runner.invoke(
        main,
        ["suite", "robustness", "--models", "expert", "--circuit", "oval",
         "--repeats", "1", "--out", str(out)],
    )
    assert res.exit_code == 0, res.output
    assert out.exists()
    assert (tmp_path / "rob.csv").exists()
    assert (tmp_path / "rob.png").exists()
    doc = json.loads(out.read_text())
    assert doc["kind"] == "robustness"
    assert len(doc["conditions"]) == 6


def test_config_file_sets_camera(runner, tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("camera:\n  resolution: [48, 36]\nexpert:\n  v_cruise: 8.0\n")
    data = tmp_path / "cfg.lrds"
    res = runner.invoke(
        main,
        ["dataset", "record", "--circuits", "oval", "--seed", "1", "--out", str(data),
         "--config", str(cfg)],
    )
    assert res.exit_code == 0, res.output
    from lanelab.datakit import read_dataset

    ds = read_dataset(data)
    assert (ds.width, ds.height) == (48, 36)
    assert ds.label_array()[:, 0].max() <= 8.0 + 1e-9


def test_bad_arguments_exit_code(runner):
    res = runner.invoke(main, ["train", "--model", "transformer", "--data", "x",
                               "--out", "w"])
    assert res.exit_code == 2

    res = runner.invoke(main, ["suite", "generalization", "--models", "pilotnet",
                               "--circuit", "oval", "--out", "r.json"])
    assert res.exit_code == 2  # missing weights for a neural brain


def test_unknown_circuit_fails(runner, tmp_path):
    res = runner.invoke(
        main,
        ["dataset", "record", "--circuits", "imola", "--out", str(tmp_path / "x.lrds")],
    )
    assert res.exit_code != 0
