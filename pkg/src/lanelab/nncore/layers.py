"""Layer specifications, shape inference, and a sequential network with
hand-derived backward passes for every layer kind."""

from dataclasses import dataclass, field

import numpy as np

from .ops import (
    ShapeError,
    _as_f64,
    _conv2d_forward,
    _conv2d_backward,
    _conv3d_forward,
    _conv3d_backward,
    _maxpool_forward,
    _maxpool2d_backward,
    _maxpool3d_backward,
    _normalize_stride,
    _split_gates,
    sigmoid,
)

LAYER_KINDS = {
    "conv2d",
    "conv3d",
    "convlstm2d",
    "dense",
    "relu",
    "tanh",
    "sigmoid",
    "maxpool2d",
    "maxpool3d",
    "flatten",
    "time_distributed",
    "head_sigmoid_tanh",
}


@dataclass(frozen=True)
class LayerSpec:
    """Declarative description of one layer.

    ``hyper`` carries kind-specific settings: filters/kernel/stride/padding for
    convolutions, units for dense, window/stride for pooling, inner spec for
    time_distributed, return_sequences for convlstm2d.
    """

    kind: str
    hyper: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ShapeError(f"unknown layer kind {self.kind!r}")

    def get(self, key, default=None):
        return self.hyper.get(key, default)


def _conv_out(size, k, s, padding):
    if padding == "same":
        return -(-size // s)
    return (size - k) // s + 1


def infer_output_shape(spec, in_shape):
    """Output shape (no batch dim) of ``spec`` applied to ``in_shape``."""
    k = spec.kind
    if k == "conv2d":
        H, W, C = in_shape
        kh, kw = spec.get("kernel")
        sh, sw = _normalize_stride(spec.get("stride", 1), 2)
        p = spec.get("padding", "valid")
        return (_conv_out(H, kh, sh, p), _conv_out(W, kw, sw, p), spec.get("filters"))
    if k == "conv3d":
        T, H, W, C = in_shape
        kt, kh, kw = spec.get("kernel")
        st, sh, sw = _normalize_stride(spec.get("stride", 1), 3)
        p = spec.get("padding", "valid")
        return (
            _conv_out(T, kt, st, p),
            _conv_out(H, kh, sh, p),
            _conv_out(W, kw, sw, p),
            spec.get("filters"),
        )
    if k == "convlstm2d":
        f = spec.get("filters")
        if len(in_shape) == 3:  # single frame, scanned as a length-1 sequence
            H, W, C = in_shape
            if spec.get("return_sequences", False):
                raise ShapeError("return_sequences needs a time axis on the input")
            return (H, W, f)
        T, H, W, C = in_shape
        if spec.get("return_sequences", False):
            return (T, H, W, f)
        return (H, W, f)
    if k == "dense":
        (n,) = in_shape
        return (spec.get("units"),)
    if k in ("relu", "tanh", "sigmoid", "head_sigmoid_tanh"):
        return tuple(in_shape)
    if k == "maxpool2d":
        H, W, C = in_shape
        wh, ww = _normalize_stride(spec.get("window"), 2)
        sh, sw = _normalize_stride(spec.get("stride", spec.get("window")), 2)
        return ((H - wh) // sh + 1, (W - ww) // sw + 1, C)
    if k == "maxpool3d":
        T, H, W, C = in_shape
        wt, wh, ww = _normalize_stride(spec.get("window"), 3)
        st, sh, sw = _normalize_stride(spec.get("stride", spec.get("window")), 3)
        return (
            (T - wt) // st + 1,
            (H - wh) // sh + 1,
            (W - ww) // sw + 1,
            C,
        )
    if k == "flatten":
        return (int(np.prod(in_shape)),)
    if k == "time_distributed":
        T = in_shape[0]
        inner_out = infer_output_shape(spec.get("inner"), in_shape[1:])
        return (T,) + inner_out
    raise ShapeError(f"unknown layer kind {k!r}")


def infer_param_shapes(spec, in_shape):
    """Parameter name -> shape map for ``spec`` at ``in_shape``.

    Non-parametric layers return an empty dict.
    """
    k = spec.kind
    if k == "conv2d":
        kh, kw = spec.get("kernel")
        return {
            "kernel": (kh, kw, in_shape[-1], spec.get("filters")),
            "bias": (spec.get("filters"),),
        }
    if k == "conv3d":
        kt, kh, kw = spec.get("kernel")
        return {
            "kernel": (kt, kh, kw, in_shape[-1], spec.get("filters")),
            "bias": (spec.get("filters"),),
        }
    if k == "convlstm2d":
        kh, kw = spec.get("kernel")
        f = spec.get("filters")
        return {
            "kernel": (kh, kw, in_shape[-1], 4 * f),
            "recurrent_kernel": (kh, kw, f, 4 * f),
            "bias": (4 * f,),
        }
    if k == "dense":
        return {
            "kernel": (in_shape[0], spec.get("units")),
            "bias": (spec.get("units"),),
        }
    if k == "time_distributed":
        return infer_param_shapes(spec.get("inner"), in_shape[1:])
    return {}


def _glorot_limit(shape, kind):
    if kind == "dense":
        fan_in, fan_out = shape
    elif kind == "conv2d":
        kh, kw, cin, cout = shape
        fan_in, fan_out = kh * kw * cin, kh * kw * cout
    elif kind == "conv3d":
        kt, kh, kw, cin, cout = shape
        fan_in, fan_out = kt * kh * kw * cin, kt * kh * kw * cout
    else:  # convlstm kernels: treat per-gate fan-out
        kh, kw, cin, c4 = shape
        fan_in, fan_out = kh * kw * cin, kh * kw * (c4 // 4)
    return np.sqrt(6.0 / (fan_in + fan_out))


# ---------------------------------------------------------------------------
# Layer runtime objects


class _Layer:
    """One instantiated layer: owns params, caches the forward pass."""

    def __init__(self, spec, in_shape):
        self.spec = spec
        self.in_shape = tuple(in_shape)
        self.out_shape = infer_output_shape(spec, in_shape)
        self.param_shapes = infer_param_shapes(spec, in_shape)
        self.params = {}
        self.grads = {}
        self._cache = None

    def init_params(self, rng):
        for name, shape in self.param_shapes.items():
            if name == "bias":
                self.params[name] = np.zeros(shape)
            else:
                kind = self.spec.kind
                if kind == "time_distributed":
                    kind = self.spec.get("inner").kind
                lim = _glorot_limit(shape, kind if kind in ("dense", "conv2d", "conv3d") else "convlstm")
                self.params[name] = rng.uniform(-lim, lim, size=shape)

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError


class _Conv2D(_Layer):
    def forward(self, x, train=False):
        stride = _normalize_stride(self.spec.get("stride", 1), 2)
        y, cache = _conv2d_forward(
            x, self.params["kernel"], self.params["bias"], stride, self.spec.get("padding", "valid")
        )
        if train:
            self._cache = cache
        return y

    def backward(self, dy):
        dx, dk, db = _conv2d_backward(dy, self.params["kernel"], self._cache)
        self.grads = {"kernel": dk, "bias": db}
        return dx


class _Conv3D(_Layer):
    def forward(self, x, train=False):
        stride = _normalize_stride(self.spec.get("stride", 1), 3)
        y, cache = _conv3d_forward(
            x, self.params["kernel"], self.params["bias"], stride, self.spec.get("padding", "valid")
        )
        if train:
            self._cache = cache
        return y

    def backward(self, dy):
        dx, dk, db = _conv3d_backward(dy, self.params["kernel"], self._cache)
        self.grads = {"kernel": dk, "bias": db}
        return dx


class _Dense(_Layer):
    def forward(self, x, train=False):
        if train:
            self._cache = x
        return x @ self.params["kernel"] + self.params["bias"]

    def backward(self, dy):
        x = self._cache
        self.grads = {"kernel": x.T @ dy, "bias": dy.sum(axis=0)}
        return dy @ self.params["kernel"].T


class _ReLU(_Layer):
    def forward(self, x, train=False):
        y = np.maximum(x, 0.0)
        if train:
            self._cache = x > 0
        return y

    def backward(self, dy):
        return dy * self._cache


class _Tanh(_Layer):
    def forward(self, x, train=False):
        y = np.tanh(x)
        if train:
            self._cache = y
        return y

    def backward(self, dy):
        return dy * (1.0 - self._cache**2)


class _Sigmoid(_Layer):
    def forward(self, x, train=False):
        y = sigmoid(x)
        if train:
            self._cache = y
        return y

    def backward(self, dy):
        y = self._cache
        return dy * y * (1.0 - y)


class _HeadSigmoidTanh(_Layer):
    """Two-unit output head: sigmoid on column 0, tanh on column 1."""

    def forward(self, x, train=False):
        if x.shape[-1] != 2:
            raise ShapeError(f"head expects 2 units, got {x.shape[-1]}")
        y = np.empty_like(x)
        y[..., 0] = sigmoid(x[..., 0])
        y[..., 1] = np.tanh(x[..., 1])
        if train:
            self._cache = y
        return y

    def backward(self, dy):
        y = self._cache
        dx = np.empty_like(dy)
        dx[..., 0] = dy[..., 0] * y[..., 0] * (1.0 - y[..., 0])
        dx[..., 1] = dy[..., 1] * (1.0 - y[..., 1] ** 2)
        return dx


class _MaxPool2D(_Layer):
    def forward(self, x, train=False):
        window = _normalize_stride(self.spec.get("window"), 2)
        stride = _normalize_stride(self.spec.get("stride", self.spec.get("window")), 2)
        if window[0] > x.shape[1] or window[1] > x.shape[2]:
            raise ShapeError(f"pool window {window} larger than input {x.shape[1:3]}")
        y, arg = _maxpool_forward(x, window, stride, (1, 2))
        if train:
            self._cache = (x, window, stride, arg)
        return y

    def backward(self, dy):
        x, window, stride, arg = self._cache
        return _maxpool2d_backward(dy, x, window, stride, arg)


class _MaxPool3D(_Layer):
    def forward(self, x, train=False):
        window = _normalize_stride(self.spec.get("window"), 3)
        stride = _normalize_stride(self.spec.get("stride", self.spec.get("window")), 3)
        if window[0] > x.shape[1] or window[1] > x.shape[2] or window[2] > x.shape[3]:
            raise ShapeError(f"pool window {window} larger than input {x.shape[1:4]}")
        y, arg = _maxpool_forward(x, window, stride, (1, 2, 3))
        if train:
            self._cache = (x, window, stride, arg)
        return y

    def backward(self, dy):
        x, window, stride, arg = self._cache
        return _maxpool3d_backward(dy, x, window, stride, arg)


class _Flatten(_Layer):
    def forward(self, x, train=False):
        if train:
            self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._cache)


class _TimeDistributed(_Layer):
    """Applies the inner layer independently at each timestep."""

    def __init__(self, spec, in_shape):
        super().__init__(spec, in_shape)
        self.inner = _make_layer(spec.get("inner"), in_shape[1:])
        self.params = self.inner.params
        self.param_shapes = self.inner.param_shapes

    def init_params(self, rng):
        self.inner.init_params(rng)
        self.params = self.inner.params

    def forward(self, x, train=False):
        B, T = x.shape[0], x.shape[1]
        y = self.inner.forward(x.reshape((B * T,) + x.shape[2:]), train=train)
        if train:
            self._cache = (B, T)
        return y.reshape((B, T) + y.shape[1:])

    def backward(self, dy):
        B, T = self._cache
        dx = self.inner.backward(dy.reshape((B * T,) + dy.shape[2:]))
        self.grads = self.inner.grads
        return dx.reshape((B, T) + dx.shape[1:])


class _ConvLSTM2D(_Layer):
    """Convolutional LSTM scanned over the time axis, zero initial state.

    Gates: i, f, o sigmoid; candidate tanh; c = f*c_prev + i*g; h = o*tanh(c).
    No peepholes. Gate convolutions are stride-1 "same".
    """

    def forward(self, x, train=False):
        if x.ndim == 4:  # single frame: scan one step
            self._single = True
            x = x[:, None]
        else:
            self._single = False
        B, T, H, W, Cin = x.shape
        f = self.spec.get("filters")
        kernel = self.params["kernel"]
        rec = self.params["recurrent_kernel"]
        bias = self.params["bias"]
        zeros4 = np.zeros(4 * f)
        h = np.zeros((B, H, W, f))
        c = np.zeros((B, H, W, f))
        steps = []
        hs = np.empty((B, T, H, W, f))
        for t in range(T):
            zx, cx = _conv2d_forward(x[:, t], kernel, zeros4, (1, 1), "same")
            zh, ch = _conv2d_forward(h, rec, zeros4, (1, 1), "same")
            z = zx + zh + bias
            zi, zf, zg, zo = _split_gates(z, f)
            i = sigmoid(zi)
            fg = sigmoid(zf)
            g = np.tanh(zg)
            o = sigmoid(zo)
            c_prev = c
            c = fg * c_prev + i * g
            tc = np.tanh(c)
            h = o * tc
            hs[:, t] = h
            if train:
                steps.append((cx, ch, i, fg, g, o, c_prev, tc))
        if train:
            self._cache = steps
        if self.spec.get("return_sequences", False):
            return hs
        return hs[:, -1]

    def backward(self, dy):
        f = self.spec.get("filters")
        kernel = self.params["kernel"]
        rec = self.params["recurrent_kernel"]
        steps = self._cache
        T = len(steps)
        seq = self.spec.get("return_sequences", False)
        dk = np.zeros_like(kernel)
        drec = np.zeros_like(rec)
        db = np.zeros_like(self.params["bias"])
        dh_next = 0.0
        dc_next = 0.0
        dxs = []
        for t in range(T - 1, -1, -1):
            cx, ch, i, fg, g, o, c_prev, tc = steps[t]
            if seq:
                dh = dy[:, t] + dh_next
            else:
                dh = (dy if t == T - 1 else 0.0) + dh_next
            dc = dc_next + dh * o * (1.0 - tc**2)
            do = dh * tc
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dz = np.concatenate(
                [
                    di * i * (1.0 - i),
                    df * fg * (1.0 - fg),
                    dg * (1.0 - g**2),
                    do * o * (1.0 - o),
                ],
                axis=-1,
            )
            dx_t, dk_t, db_t = _conv2d_backward(dz, kernel, cx)
            dh_next, drec_t, _ = _conv2d_backward(dz, rec, ch)
            dk += dk_t
            drec += drec_t
            db += db_t
            dc_next = dc * fg
            dxs.append(dx_t)
        self.grads = {"kernel": dk, "recurrent_kernel": drec, "bias": db}
        dxs.reverse()
        dx = np.stack(dxs, axis=1)
        return dx[:, 0] if self._single else dx


_LAYER_CLASSES = {
    "conv2d": _Conv2D,
    "conv3d": _Conv3D,
    "convlstm2d": _ConvLSTM2D,
    "dense": _Dense,
    "relu": _ReLU,
    "tanh": _Tanh,
    "sigmoid": _Sigmoid,
    "maxpool2d": _MaxPool2D,
    "maxpool3d": _MaxPool3D,
    "flatten": _Flatten,
    "time_distributed": _TimeDistributed,
    "head_sigmoid_tanh": _HeadSigmoidTanh,
}


def _make_layer(spec, in_shape):
    return _LAYER_CLASSES[spec.kind](spec, in_shape)


class Network:
    """A sequential stack of layers built from LayerSpecs.

    Forward passes are pure; ``backward`` consumes the caches left by the most
    recent ``forward(..., train=True)`` call.
    """

    def __init__(self, layer_specs, input_shape, rng=None):
        self.input_shape = tuple(input_shape)
        self.layers = []
        shape = self.input_shape
        for spec in layer_specs:
            layer = _make_layer(spec, shape)
            self.layers.append(layer)
            shape = layer.out_shape
        self.output_shape = shape
        if rng is not None:
            self.init_params(rng)

    def init_params(self, rng):
        for layer in self.layers:
            layer.init_params(rng)

    def param_dict(self):
        """Flat name -> array view of all parameters, in layer order."""
        out = {}
        for idx, layer in enumerate(self.layers):
            for name, arr in layer.params.items():
                out[f"{idx:02d}.{layer.spec.kind}.{name}"] = arr
        return out

    def set_params(self, named):
        for idx, layer in enumerate(self.layers):
            for name in layer.param_shapes:
                key = f"{idx:02d}.{layer.spec.kind}.{name}"
                arr = np.ascontiguousarray(named[key], dtype=np.float64)
                if arr.shape != layer.param_shapes[name]:
                    raise ShapeError(
                        f"param {key} shape {arr.shape} != expected {layer.param_shapes[name]}"
                    )
                layer.params[name] = arr

    def forward(self, x, train=False):
        x = _as_f64(x)
        single = x.shape == self.input_shape
        if single:
            x = x[None]
        if x.shape[1:] != self.input_shape:
            raise ShapeError(f"input shape {x.shape[1:]} != expected {self.input_shape}")
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return x[0] if single else x

    def backward(self, dy):
        """Backprop ``dy`` (gradient at the output) through all layers.

        Returns the flat gradient dict matching ``param_dict`` keys.
        """
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        grads = {}
        for idx, layer in enumerate(self.layers):
            for name in layer.param_shapes:
                grads[f"{idx:02d}.{layer.spec.kind}.{name}"] = layer.grads[name]
        return grads
