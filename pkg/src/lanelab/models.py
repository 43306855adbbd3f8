"""The four vision brains: architecture definitions, preprocessing, output
(de)normalization, parameter counting, and weight serialization.

Two profiles exist per architecture: "paper" matches the published input
shapes and parameter-count targets; "desk" is a scaled-down variant sized for
fast CPU training on small rendered frames.
"""

import io
import struct
from dataclasses import dataclass

import numpy as np

from .common import DriveCommand, Limits
from .nncore import LayerSpec, Network, infer_output_shape, infer_param_shapes
from .nncore.ops import ShapeError

MODEL_NAMES = ("pilotnet", "deepest_lstm_tiny", "pilotnet_x3", "memdccp")

WEIGHTS_MAGIC = b"LRWT"
WEIGHTS_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    name: str
    profile: str
    input_kind: str  # "single_frame" | "sequence_of_3"
    input_shape: tuple  # (H,W,3) or (3,H,W,3)
    layers: tuple


@dataclass(frozen=True)
class PreprocessSpec:
    """Horizon crop row, bilinear-resize target, and the implied [0,1] scaling."""

    horizon_row: int
    target: tuple  # (H, W)


def _c2(filters, kernel, stride=1, padding="valid"):
    return LayerSpec("conv2d", {"filters": filters, "kernel": kernel, "stride": stride, "padding": padding})


def _c3(filters, kernel, stride=1, padding="same"):
    return LayerSpec("conv3d", {"filters": filters, "kernel": kernel, "stride": stride, "padding": padding})


def _lstm(filters, seq=False):
    return LayerSpec("convlstm2d", {"filters": filters, "kernel": (3, 3), "return_sequences": seq})


def _dense(units):
    return LayerSpec("dense", {"units": units})


def _td(inner):
    return LayerSpec("time_distributed", {"inner": inner})


_RELU = LayerSpec("relu")
_FLAT = LayerSpec("flatten")
_HEAD = LayerSpec("head_sigmoid_tanh")


def _pilotnet_layers(first_dense):
    return (
        _c2(24, (5, 5), (2, 2)), _RELU,
        _c2(36, (5, 5), (2, 2)), _RELU,
        _c2(48, (5, 5), (2, 2)), _RELU,
        _c2(64, (3, 3)), _RELU,
        _c2(64, (3, 3), padding="same"), _RELU,
        _FLAT,
        _dense(first_dense), _RELU,
        _dense(100), _RELU,
        _dense(50), _RELU,
        _dense(2), _HEAD,
    )


def _build_paper(name):
    if name == "pilotnet":
        return ModelSpec(name, "paper", "single_frame", (66, 200, 3), _pilotnet_layers(1164))
    if name == "deepest_lstm_tiny":
        layers = (
            _c2(8, (3, 3), (2, 2), "same"), _RELU,
            _c2(12, (3, 3), (2, 2), "same"), _RELU,
            _lstm(12),
            _lstm(12),
            LayerSpec("maxpool2d", {"window": (2, 2)}),
            _FLAT,
            _dense(44), _RELU,
            _dense(2), _HEAD,
        )
        return ModelSpec(name, "paper", "single_frame", (50, 100, 3), layers)
    if name == "pilotnet_x3":
        convs = _pilotnet_layers(700)[:10]  # conv stack incl. relus, pre-flatten
        layers = tuple(
            _td(l) if l.kind == "conv2d" else l for l in convs
        ) + (
            _FLAT,
            _dense(700), _RELU,
            _dense(100), _RELU,
            _dense(50), _RELU,
            _dense(2), _HEAD,
        )
        return ModelSpec(name, "paper", "sequence_of_3", (3, 50, 100, 3), layers)
    if name == "memdccp":
        layers = (
            _c3(16, (3, 3, 3), (1, 2, 2)), _RELU,
            _c3(24, (3, 3, 3), (1, 2, 2)), _RELU,
            _c3(32, (3, 3, 3), (1, 2, 2)), _RELU,
            _c3(48, (3, 3, 3), (1, 1, 1)), _RELU,
            _c3(64, (3, 3, 3), (1, 2, 2)), _RELU,
            _lstm(48, seq=True),
            _lstm(40, seq=True),
            _lstm(32),
            _FLAT,
            _dense(360), _RELU,
            _dense(64), _RELU,
            _dense(2), _HEAD,
        )
        return ModelSpec(name, "paper", "sequence_of_3", (3, 50, 100, 3), layers)
    raise ValueError(f"unknown model name {name!r}")


def _build_desk(name):
    if name == "pilotnet":
        layers = (
            _c2(16, (5, 5), (2, 2)), _RELU,
            _c2(24, (3, 3), (2, 2)), _RELU,
            _c2(32, (3, 3)), _RELU,
            _FLAT,
            _dense(128), _RELU,
            _dense(32), _RELU,
            _dense(2), _HEAD,
        )
        return ModelSpec(name, "desk", "single_frame", (24, 48, 3), layers)
    if name == "deepest_lstm_tiny":
        layers = (
            _c2(8, (3, 3), (2, 2), "same"), _RELU,
            _c2(12, (3, 3), (2, 2), "same"), _RELU,
            _lstm(12),
            _lstm(12),
            _FLAT,
            _dense(32), _RELU,
            _dense(2), _HEAD,
        )
        return ModelSpec(name, "desk", "single_frame", (24, 48, 3), layers)
    if name == "pilotnet_x3":
        layers = (
            _td(_c2(16, (5, 5), (2, 2))), _RELU,
            _td(_c2(24, (3, 3), (2, 2))), _RELU,
            _td(_c2(32, (3, 3))), _RELU,
            _FLAT,
            _dense(128), _RELU,
            _dense(32), _RELU,
            _dense(2), _HEAD,
        )
        return ModelSpec(name, "desk", "sequence_of_3", (3, 24, 48, 3), layers)
    if name == "memdccp":
        layers = (
            _c3(16, (3, 3, 3), (1, 2, 2)), _RELU,
            _c3(16, (3, 3, 3), (1, 2, 2)), _RELU,
            _c3(24, (3, 3, 3), (1, 1, 1)), _RELU,
            _c3(24, (3, 3, 3), (1, 2, 2)), _RELU,
            _c3(32, (3, 3, 3), (1, 1, 1)), _RELU,
            _lstm(24, seq=True),
            _lstm(16, seq=True),
            _lstm(16),
            _FLAT,
            _dense(64), _RELU,
            _dense(32), _RELU,
            _dense(2), _HEAD,
        )
        return ModelSpec(name, "desk", "sequence_of_3", (3, 24, 48, 3), layers)
    raise ValueError(f"unknown model name {name!r}")


def build_model(name, profile="paper"):
    """Model spec for one of the four brains, at the given profile."""
    if name not in MODEL_NAMES:
        raise ValueError(f"unknown model name {name!r}; expected one of {MODEL_NAMES}")
    if profile == "paper":
        return _build_paper(name)
    if profile == "desk":
        return _build_desk(name)
    raise ValueError(f"unknown profile {profile!r}")


def param_count(spec):
    """Total number of scalar parameters of a model spec."""
    total = 0
    shape = spec.input_shape
    for layer in spec.layers:
        for pshape in infer_param_shapes(layer, shape).values():
            total += int(np.prod(pshape))
        shape = infer_output_shape(layer, shape)
    return total


def manifest_text(spec):
    """Human-readable manifest listing each layer's hyperparameters."""
    lines = [
        f"model: {spec.name}",
        f"profile: {spec.profile}",
        f"input_kind: {spec.input_kind}",
        f"input_shape: {'x'.join(str(d) for d in spec.input_shape)}",
        f"parameters: {param_count(spec)}",
        "layers:",
    ]
    shape = spec.input_shape
    for i, layer in enumerate(spec.layers):
        kind = layer.kind
        hyper = dict(layer.hyper)
        if kind == "time_distributed":
            inner = hyper.pop("inner")
            hyper = {"inner": inner.kind, **inner.hyper}
        desc = " ".join(f"{k}={v}" for k, v in hyper.items())
        shape = infer_output_shape(layer, shape)
        lines.append(f"  {i:02d} {kind} {desc} -> {'x'.join(str(d) for d in shape)}".rstrip())
    return "\n".join(lines) + "\n"


def make_network(spec, seed=None):
    """Instantiate the network; Glorot-init kernels / zero biases when seeded."""
    rng = np.random.default_rng(seed) if seed is not None else None
    return Network(spec.layers, spec.input_shape, rng=rng)


def init_weights(spec, seed):
    """Freshly initialized named weights for ``spec``."""
    return {k: v.copy() for k, v in make_network(spec, seed=seed).param_dict().items()}


def forward_brain(spec, weights, x, network=None):
    """Run one input through the brain; returns (v_norm, w_norm).

    v_norm is in [0,1] (sigmoid head), w_norm in [-1,1] (tanh head). ``x`` must
    match the spec's input kind: one preprocessed frame, or a 3-frame sequence
    ordered oldest -> newest.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != spec.input_shape:
        raise ShapeError(
            f"{spec.name} expects input {spec.input_shape} ({spec.input_kind}), got {x.shape}"
        )
    if network is None:
        network = make_network(spec)
        network.set_params(weights)
    y = network.forward(x)
    return float(y[0]), float(y[1])


def denormalize(v_norm, w_norm, limits):
    """Map head outputs to physical speeds: v = v_norm*v_max, w = w_norm*w_max."""
    return DriveCommand(v_norm * limits.v_max, w_norm * limits.w_max)


def normalize(cmd, limits):
    """Inverse of denormalize; used when labeling recorded samples."""
    return cmd.v / limits.v_max, cmd.w / limits.w_max


# ---------------------------------------------------------------------------
# preprocessing


def preprocess_for(spec, horizon_row):
    """PreprocessSpec feeding ``spec``: crop at the renderer-reported horizon,
    resize to the model's input frame."""
    if spec.input_kind == "sequence_of_3":
        th, tw = spec.input_shape[1], spec.input_shape[2]
    else:
        th, tw = spec.input_shape[0], spec.input_shape[1]
    return PreprocessSpec(horizon_row=horizon_row, target=(th, tw))


def bilinear_resize(img, out_h, out_w):
    """Bilinear resample with half-pixel centers; img is (H,W,C) float."""
    H, W = img.shape[:2]
    if (H, W) == (out_h, out_w):
        return img.copy()
    ys = (np.arange(out_h) + 0.5) * (H / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (W / out_w) - 0.5
    ys = np.clip(ys, 0, H - 1)
    xs = np.clip(xs, 0, W - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, H - 1)
    x1 = np.minimum(x0 + 1, W - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]
    top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
    bot = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def preprocess(image, spec):
    """Crop above the horizon, bilinear-resize, scale bytes to [0,1].

    ``image`` is an (H,W,3) uint8 array (or anything array-like); returns a
    float64 tensor of shape (target_h, target_w, 3).
    """
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError(f"expected (H,W,3) image, got {img.shape}")
    if not 0 <= spec.horizon_row < img.shape[0]:
        raise ShapeError(
            f"horizon_row {spec.horizon_row} leaves no rows in a {img.shape[0]}-row image"
        )
    cropped = img[spec.horizon_row :].astype(np.float64)
    th, tw = spec.target
    return bilinear_resize(cropped, th, tw) / 255.0


# ---------------------------------------------------------------------------
# weight serialization ("LRWT": magic, version, model name, named f64 tensors)


class WeightsFormatError(ValueError):
    """Raised for bad magic, version/name/shape mismatch, or truncation."""


def save_weights(spec, weights, path):
    buf = io.BytesIO()
    buf.write(WEIGHTS_MAGIC)
    buf.write(struct.pack("<I", WEIGHTS_VERSION))
    name = spec.name.encode()
    buf.write(struct.pack("<I", len(name)))
    buf.write(name)
    buf.write(struct.pack("<I", len(weights)))
    for pname in sorted(weights):
        arr = np.ascontiguousarray(weights[pname], dtype=np.float64)
        nb = pname.encode()
        buf.write(struct.pack("<I", len(nb)))
        buf.write(nb)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(arr.tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def _read_exact(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise WeightsFormatError(f"truncated weight file while reading {what}")
    return data


def load_weights(spec, path):
    """Load weights saved by ``save_weights``; validates name and shapes."""
    expected = expected_param_shapes(spec)
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != WEIGHTS_MAGIC:
            raise WeightsFormatError("bad magic; not a weight file")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != WEIGHTS_VERSION:
            raise WeightsFormatError(
                f"weight format version {version}, reader supports {WEIGHTS_VERSION}"
            )
        (nlen,) = struct.unpack("<I", _read_exact(fh, 4, "name length"))
        name = _read_exact(fh, nlen, "model name").decode()
        if name != spec.name:
            raise WeightsFormatError(f"file holds weights for {name!r}, spec is {spec.name!r}")
        (count,) = struct.unpack("<I", _read_exact(fh, 4, "parameter count"))
        weights = {}
        for _ in range(count):
            (plen,) = struct.unpack("<I", _read_exact(fh, 4, "param name length"))
            pname = _read_exact(fh, plen, "param name").decode()
            (rank,) = struct.unpack("<B", _read_exact(fh, 1, "rank"))
            shape = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank, "dims"))
            size = int(np.prod(shape)) if rank else 1
            raw = _read_exact(fh, 8 * size, f"payload of {pname}")
            weights[pname] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    if set(weights) != set(expected):
        missing = set(expected) ^ set(weights)
        raise WeightsFormatError(f"parameter set mismatch: {sorted(missing)}")
    for pname, shape in expected.items():
        if weights[pname].shape != shape:
            raise WeightsFormatError(
                f"param {pname} has shape {weights[pname].shape}, spec wants {shape}"
            )
    return weights


def expected_param_shapes(spec):
    """Flat param-name -> shape map for a model spec (mirrors Network naming)."""
    out = {}
    shape = spec.input_shape
    for idx, layer in enumerate(spec.layers):
        for name, pshape in infer_param_shapes(layer, shape).items():
            out[f"{idx:02d}.{layer.kind}.{name}"] = tuple(pshape)
        shape = infer_output_shape(layer, shape)
    return out
