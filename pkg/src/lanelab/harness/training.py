"""Gradient training of the brains on recorded datasets, with internal
(MAE/MSE) metric tracking."""

import time
from dataclasses import dataclass, field

import numpy as np

from .. import datakit
from ..models import make_network, preprocess
from ..nncore import AdamState, adam_step
from ..nncore.losses import mae_metric, mse_loss, mse_loss_grad


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainHistory:
    """Per-epoch train/val metrics; epoch 0 entries are at initialization."""

    initial: dict = field(default_factory=dict)
    epochs: list = field(default_factory=list)
    seed: int = 0
    weights_path: str = None

    def as_dict(self):
        return {
            "initial": self.initial,
            "epochs": self.epochs,
            "seed": self.seed,
            "weights_path": self.weights_path,
        }


def _preprocess_all(dataset, pspec):
    """Cache of preprocessed frames for every sample, (N, h, w, 3) float64."""
    th, tw = pspec.target
    out = np.empty((len(dataset), th, tw, 3))
    for i in range(len(dataset)):
        out[i] = preprocess(dataset.images[i], pspec)
    return out


def _normalized_labels(dataset):
    labels = dataset.label_array().copy()
    labels[:, 0] /= dataset.limits.v_max
    labels[:, 1] /= dataset.limits.w_max
    return labels


def _triple_table(manifest):
    return np.array(
        [datakit.sequence_indices(manifest, i) for i in range(manifest["count"])], dtype=np.int64
    )


def _assemble(frames, triples, ids, input_kind):
    """Model inputs for the given sample ids; sequence models read the
    bootstrap-repeated (i-2, i-1, i) triple within each episode."""
    if input_kind == "single_frame":
        return frames[ids]
    return frames[triples[ids]]  # (B, 3, h, w, 3)


def _metrics(network, frames, labels, triples, ids, input_kind, batch):
    preds = np.empty((len(ids), 2))
    for off in range(0, len(ids), batch):
        chunk = ids[off : off + batch]
        preds[off : off + len(chunk)] = network.forward(
            _assemble(frames, triples, chunk, input_kind)
        )
    target = labels[ids]
    return mae_metric(preds, target), mse_loss(preds, target)


def train(
    spec,
    dataset,
    pspec,
    epochs=30,
    batch=64,
    lr=1e-3,
    seed=0,
    val_fraction=0.2,
    mirror_prob=0.5,
    brightness_jitter=0.2,
):
    """Train a brain with Adam on MSE over normalized (v, w) labels.

    Mirror augmentation (probability ``mirror_prob``) and brightness jitter
    are applied on the fly; both are deterministic under ``seed``. Returns
    (weights, TrainHistory).
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    manifest = dataset.manifest()
    frames = _preprocess_all(dataset, pspec)
    labels = _normalized_labels(dataset)
    train_ids, val_ids = datakit.split(manifest, val_fraction, seed)
    triples = _triple_table(manifest)

    rng = np.random.default_rng(seed)
    network = make_network(spec, seed=seed)
    params = network.param_dict()
    opt = AdamState(params, lr=lr)
    kind = spec.input_kind

    history = TrainHistory(seed=seed)
    t_mae, t_mse = _metrics(network, frames, labels, triples, train_ids, kind, batch)
    v_mae, v_mse = _metrics(network, frames, labels, triples, val_ids, kind, batch)
    history.initial = {"train_mae": t_mae, "train_mse": t_mse, "val_mae": v_mae, "val_mse": v_mse}

    width_axis = 2 if kind == "single_frame" else 3
    for epoch in range(epochs):
        t0 = time.monotonic()
        order = rng.permutation(train_ids)
        for off in range(0, len(order), batch):
            chunk = order[off : off + batch]
            x = _assemble(frames, triples, chunk, kind)
            y = labels[chunk].copy()
            mirror_mask = rng.random(len(chunk)) < mirror_prob
            if mirror_mask.any():
                x[mirror_mask] = np.flip(x[mirror_mask], axis=width_axis)
                y[mirror_mask, 1] *= -1.0
            if brightness_jitter > 0:
                scale = rng.uniform(
                    1 - brightness_jitter, 1 + brightness_jitter, size=len(chunk)
                )
                x *= scale.reshape((-1,) + (1,) * (x.ndim - 1))
                np.clip(x, 0.0, 1.0, out=x)
            pred = network.forward(x, train=True)
            loss = mse_loss(pred, y)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch offset {off}: {loss}"
                )
            grads = network.backward(mse_loss_grad(pred, y))
            adam_step(params, grads, opt)
        t_mae, t_mse = _metrics(network, frames, labels, triples, train_ids, kind, batch)
        v_mae, v_mse = _metrics(network, frames, labels, triples, val_ids, kind, batch)
        history.epochs.append(
            {
                "epoch": epoch + 1,
                "train_mae": t_mae,
                "train_mse": t_mse,
                "val_mae": v_mae,
                "val_mse": v_mse,
                "wall_s": round(time.monotonic() - t0, 3),
            }
        )
    weights = {k: v.copy() for k, v in params.items()}
    return weights, history


def evaluate_internal(spec, weights, dataset, pspec, ids=None, batch=64):
    """(MAE, MSE) of the brain on normalized labels over the given sample ids
    (default: the whole dataset). Never launches a simulation."""
    manifest = dataset.manifest()
    frames = _preprocess_all(dataset, pspec)
    labels = _normalized_labels(dataset)
    if ids is None:
        ids = np.arange(len(dataset))
    network = make_network(spec)
    network.set_params(weights)
    return _metrics(network, frames, labels, _triple_table(manifest), np.asarray(ids), spec.input_kind, batch)
