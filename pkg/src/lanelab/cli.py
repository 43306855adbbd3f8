"""Command-line interface: circuits, dataset, train, eval, suite."""

import json
import os
import sys

import click
import numpy as np
import yaml

from .common import Limits
from .datakit import (
    Dataset,
    EpisodeAborted,
    export_dataset,
    read_dataset,
    record_episode,
    split,
    write_dataset,
)
from .harness import (
    emit_report,
    evaluate_internal,
    generalization_suite,
    robustness_suite,
    run_episode,
    train,
)
from .harness.figures import circuits_figure, history_figure, suite_figure
from .harness.suites import CAMERA_PITCH_DOWN, CAMERA_SHIFT
from .models import (
    MODEL_NAMES,
    build_model,
    load_weights,
    manifest_text,
    preprocess_for,
    save_weights,
)
from .pilots import ExpertBrain, NeuralBrain, PidState, SpeedSchedule
from .simworld import CameraConfig, TrackVariation, builtin_circuits, save_track
from .simworld.camera import horizon_row_for
from .simworld.tracks import get_circuit

MODEL_CHOICES = list(MODEL_NAMES)


def _load_config(path):
    if not path:
        return {}
    with open(path) as fh:
        return yaml.safe_load(fh) or {}


def _camera_from_config(cfg, resolution=None):
    cam = cfg.get("camera", {})
    res = resolution or tuple(cam.get("resolution", (64, 48)))
    return CameraConfig(
        height=cam.get("height", 3.0),
        pitch=cam.get("pitch", 0.18),
        hfov=cam.get("hfov", 1.7),
        resolution=tuple(res),
    )


def _limits_from_config(cfg):
    lim = cfg.get("limits", {})
    return Limits(v_max=lim.get("v_max", 12.0), w_max=lim.get("w_max", 2.5))


def _expert_from_config(cfg, limits, dt):
    e = cfg.get("expert", {})
    pid = PidState(kp=e.get("kp", 2.2), ki=e.get("ki", 0.01), kd=e.get("kd", 1.2))
    sched = SpeedSchedule(
        v_cruise=e.get("v_cruise", 10.0), v_min=e.get("v_min", 3.0), alpha=e.get("alpha", 0.6)
    )
    return ExpertBrain(pid=pid, schedule=sched, limits=limits, dt=dt)


def _sim_params(cfg):
    sim = cfg.get("sim", {})
    return sim.get("dt", 0.05), sim.get("tau", 0.2)


@click.group()
def main():
    """Desk-scale end-to-end driving laboratory."""


# ---------------------------------------------------------------------------
# circuits


@main.group()
def circuits():
    """Inspect or export the builtin circuits."""


@circuits.command("list")
def circuits_list():
    for track in builtin_circuits():
        click.echo(
            f"{track.name:18s} {track.tag:5s} length={track.length:6.1f} m "
            f"waypoints={len(track.centerline)}"
        )


@circuits.command("export")
@click.option("--out", required=True, type=click.Path(), help="output directory")
def circuits_export(out):
    os.makedirs(out, exist_ok=True)
    tracks = builtin_circuits()
    for track in tracks:
        save_track(track, os.path.join(out, f"{track.name}.yaml"))
    circuits_figure(tracks, os.path.join(out, "circuits.png"))
    click.echo(f"wrote {len(tracks)} circuit files + circuits.png to {out}")


# ---------------------------------------------------------------------------
# dataset


@main.group()
def dataset():
    """Record or export imitation datasets."""


@dataset.command("record")
@click.option("--circuits", "circuit_names", required=True, help="comma-separated circuit names")
@click.option("--laps", default=1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--line", default="red", type=click.Choice(["red", "white"]), show_default=True)
@click.option("--config", type=click.Path(exists=True), default=None)
def dataset_record(circuit_names, laps, seed, out, line, config):
    cfg = _load_config(config)
    camera = _camera_from_config(cfg)
    limits = _limits_from_config(cfg)
    dt, tau = _sim_params(cfg)
    names = [n.strip() for n in circuit_names.split(",") if n.strip()]
    tracks = [get_circuit(n) for n in names]
    W, H = camera.resolution
    ds = Dataset(H, W, names, limits)
    variation = TrackVariation(line_color=line)
    for i, track in enumerate(tracks):
        expert = _expert_from_config(cfg, limits, dt)
        expert.target_color = line
        try:
            n = record_episode(
                ds, expert, track, variation, camera, seed=seed + i, max_laps=laps, dt=dt, tau=tau
            )
        except EpisodeAborted as exc:
            click.echo(f"episode failed: {exc}", err=True)
            sys.exit(1)
        click.echo(f"{track.name}: {n} samples")
    write_dataset(ds, out)
    click.echo(f"wrote {len(ds)} samples to {out}")


@dataset.command("export")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def dataset_export(in_path, out):
    ds = read_dataset(in_path)
    export_dataset(ds, out)
    click.echo(f"exported {len(ds)} frames to {out}")


# ---------------------------------------------------------------------------
# train


@main.command("train")
@click.option("--model", required=True, type=click.Choice(MODEL_CHOICES))
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--epochs", default=30, show_default=True)
@click.option("--batch", default=64, show_default=True)
@click.option("--lr", default=1e-3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--val-fraction", default=0.2, show_default=True)
@click.option("--profile", default="desk", type=click.Choice(["desk", "paper"]), show_default=True)
@click.option("--out", "weights_out", required=True, type=click.Path())
@click.option("--history", "history_out", type=click.Path(), default=None)
@click.option("--manifest", "manifest_out", type=click.Path(), default=None, help="write the model manifest here")
@click.option("--config", type=click.Path(exists=True), default=None)
def train_cmd(model, data, epochs, batch, lr, seed, val_fraction, profile, weights_out, history_out, manifest_out, config):
    """Train a brain on a recorded dataset and save its weights."""
    cfg = _load_config(config)
    camera = _camera_from_config(cfg)
    ds = read_dataset(data)
    spec = build_model(model, profile)
    pspec = preprocess_for(spec, horizon_row_for(camera))
    weights, history = train(
        spec, ds, pspec, epochs=epochs, batch=batch, lr=lr, seed=seed, val_fraction=val_fraction
    )
    save_weights(spec, weights, weights_out)
    history.weights_path = weights_out
    if manifest_out:
        with open(manifest_out, "w") as fh:
            fh.write(manifest_text(spec))
    if history_out:
        with open(history_out, "w") as fh:
            json.dump(history.as_dict(), fh, indent=2, sort_keys=True)
        history_figure(history, os.path.splitext(history_out)[0] + ".png")
    final = history.epochs[-1] if history.epochs else history.initial
    click.echo(
        f"trained {model} ({profile}) for {epochs} epochs: "
        f"val_mae={final['val_mae']:.4f} val_mse={final['val_mse']:.5f}"
    )


# ---------------------------------------------------------------------------
# eval


@main.group("eval")
def eval_group():
    """Internal (dataset) or external (simulation) evaluation."""


@eval_group.command("internal")
@click.option("--model", required=True, type=click.Choice(MODEL_CHOICES))
@click.option("--weights", required=True, type=click.Path(exists=True))
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--split", "which", default="val", type=click.Choice(["train", "val", "all"]), show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--val-fraction", default=0.2, show_default=True)
@click.option("--profile", default="desk", type=click.Choice(["desk", "paper"]), show_default=True)
@click.option("--config", type=click.Path(exists=True), default=None)
def eval_internal(model, weights, data, which, seed, val_fraction, profile, config):
    cfg = _load_config(config)
    camera = _camera_from_config(cfg)
    ds = read_dataset(data)
    spec = build_model(model, profile)
    w = load_weights(spec, weights)
    pspec = preprocess_for(spec, horizon_row_for(camera))
    ids = None
    if which != "all":
        train_ids, val_ids = split(ds.manifest(), val_fraction, seed)
        ids = train_ids if which == "train" else val_ids
    mae, mse = evaluate_internal(spec, w, ds, pspec, ids=ids)
    click.echo(f"{model} {which}: MAE={mae:.5f} MSE={mse:.6f}")


@eval_group.command("episode")
@click.option("--model", "model_name", required=True, help="model name or 'expert'")
@click.option("--weights", type=click.Path(exists=True), default=None)
@click.option("--circuit", required=True)
@click.option("--line", default="red", type=click.Choice(["red", "white", "none"]), show_default=True)
@click.option("--road", default="grey", type=click.Choice(["grey", "white"]), show_default=True)
@click.option("--walls", default="on", type=click.Choice(["on", "off"]), show_default=True)
@click.option("--noise", default=0.0, show_default=True)
@click.option("--camera-offset", default="none", type=click.Choice(["left", "right", "none"]), show_default=True)
@click.option("--camera-pitch-down", default=0.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--profile", default="desk", type=click.Choice(["desk", "paper"]), show_default=True)
@click.option("--out", type=click.Path(), default=None)
@click.option("--config", type=click.Path(exists=True), default=None)
def eval_episode(model_name, weights, circuit, line, road, walls, noise, camera_offset, camera_pitch_down, seed, profile, out, config):
    cfg = _load_config(config)
    camera = _camera_from_config(cfg)
    limits = _limits_from_config(cfg)
    dt, tau = _sim_params(cfg)
    track = get_circuit(circuit)
    variation = TrackVariation(line_color=line, road_color=road, walls=(walls == "on"))
    offset = {"left": -CAMERA_SHIFT, "right": CAMERA_SHIFT, "none": 0.0}[camera_offset]
    from dataclasses import replace

    camera = replace(camera, lateral_offset=offset, extra_pitch_down=camera_pitch_down)
    brain = _make_brain(model_name, weights, profile, cfg, camera, limits, dt)
    metrics = run_episode(
        brain, track, variation, camera, noise_p=noise, seed=seed, dt=dt, tau=tau
    )
    doc = metrics.as_dict()
    if out:
        with open(out, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
    click.echo(json.dumps(doc, sort_keys=True))


def _make_brain(name, weights_path, profile, cfg, camera, limits, dt):
    if name == "expert":
        return _expert_from_config(cfg, limits, dt)
    if name not in MODEL_NAMES:
        raise click.BadParameter(f"unknown brain {name!r}")
    if not weights_path:
        raise click.BadParameter(f"brain {name!r} needs --weights")
    spec = build_model(name, profile)
    w = load_weights(spec, weights_path)
    pspec = preprocess_for(spec, horizon_row_for(camera))
    return NeuralBrain(spec, w, pspec, limits=limits)


# ---------------------------------------------------------------------------
# suites


@main.group()
def suite():
    """Generalization and robustness evaluation grids."""


def _suite_common(models, weights_dir, circuit, profile, cfg):
    camera = _camera_from_config(cfg)
    limits = _limits_from_config(cfg)
    dt, _tau = _sim_params(cfg)
    track = get_circuit(circuit)
    brains = {}
    for name in [m.strip() for m in models.split(",") if m.strip()]:
        if name == "expert":
            brains[name] = _expert_from_config(cfg, limits, dt)
        else:
            path = os.path.join(weights_dir or ".", f"{name}.lrwt")
            if not os.path.exists(path):
                raise click.BadParameter(f"no weights for {name!r} at {path}")
            brains[name] = _make_brain(name, path, profile, cfg, camera, limits, dt)
    return brains, track, camera


def _emit_suite(report, out):
    base, ext = os.path.splitext(out)
    if ext not in (".json", ".csv"):
        raise click.BadParameter("suite --out must end in .json or .csv")
    emit_report(report, base + ".json", "json")
    emit_report(report, base + ".csv", "csv")
    suite_figure(report, base + ".png")
    click.echo(f"wrote {base}.json / .csv / .png")


@suite.command("generalization")
@click.option("--models", required=True, help="comma-separated brains (may include 'expert')")
@click.option("--weights-dir", type=click.Path(), default=None)
@click.option("--circuit", required=True)
@click.option("--repeats", default=3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--profile", default="desk", type=click.Choice(["desk", "paper"]), show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--config", type=click.Path(exists=True), default=None)
def suite_generalization(models, weights_dir, circuit, repeats, seed, profile, out, config):
    cfg = _load_config(config)
    brains, track, camera = _suite_common(models, weights_dir, circuit, profile, cfg)
    report = generalization_suite(brains, track, camera=camera, repeats=repeats, base_seed=seed)
    _emit_suite(report, out)


@suite.command("robustness")
@click.option("--models", required=True)
@click.option("--weights-dir", type=click.Path(), default=None)
@click.option("--circuit", required=True)
@click.option("--repeats", default=3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--profile", default="desk", type=click.Choice(["desk", "paper"]), show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--config", type=click.Path(exists=True), default=None)
def suite_robustness(models, weights_dir, circuit, repeats, seed, profile, out, config):
    cfg = _load_config(config)
    brains, track, camera = _suite_common(models, weights_dir, circuit, profile, cfg)
    report = robustness_suite(brains, track, camera=camera, repeats=repeats, base_seed=seed)
    _emit_suite(report, out)


if __name__ == "__main__":
    main()
