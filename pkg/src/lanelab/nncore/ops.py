"""Forward and backward passes for every layer kind, written on raw float64 arrays.

All public forward functions accept either a single sample or a batch (extra
leading dimension); backward helpers always work on the batched form and are
consumed by the layer classes in ``layers.py``.

Convolutions use the cross-correlation convention (no kernel flip). "same"
padding pads symmetrically with the extra element on the bottom/right.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeError(ValueError):
    """Raised when tensor shapes are incompatible with an operation."""


def _as_f64(x):
    return np.ascontiguousarray(np.asarray(x, dtype=np.float64))


def _same_pads(size, k, s):
    """Pad amounts (before, after) so that out == ceil(size / stride)."""
    out = -(-size // s)
    total = max(0, (out - 1) * s + k - size)
    return total // 2, total - total // 2


def _normalize_stride(stride, n):
    if np.isscalar(stride):
        return (int(stride),) * n
    stride = tuple(int(s) for s in stride)
    if len(stride) != n:
        raise ShapeError(f"stride must have {n} entries, got {len(stride)}")
    return stride


# ---------------------------------------------------------------------------
# conv2d

def _conv2d_forward(x, kernel, bias, stride, padding):
    """x: (B,H,W,Cin), kernel: (kh,kw,Cin,Cout), bias: (Cout,)."""
    B, H, W, Cin = x.shape
    kh, kw, kc, Cout = kernel.shape
    if kc != Cin:
        raise ShapeError(f"kernel expects {kc} input channels, input has {Cin}")
    sh, sw = stride
    if padding == "same":
        pt, pb = _same_pads(H, kh, sh)
        pl, pr = _same_pads(W, kw, sw)
    elif padding == "valid":
        pt = pb = pl = pr = 0
    else:
        raise ShapeError(f"unknown padding mode {padding!r}")
    xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0))) if (pt or pb or pl or pr) else x
    Hp, Wp = xp.shape[1], xp.shape[2]
    if kh > Hp or kw > Wp:
        raise ShapeError(f"kernel {kh}x{kw} larger than (padded) input {Hp}x{Wp}")
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::sh, ::sw]
    # win: (B, OH, OW, Cin, kh, kw)
    y = np.tensordot(win, kernel, axes=([3, 4, 5], [2, 0, 1]))
    y += bias
    cache = (xp, (pt, pb, pl, pr), stride, kernel.shape, x.shape)
    return y, cache


def _conv2d_backward(dy, kernel, cache):
    """Returns (dx, dkernel, dbias). dy: (B,OH,OW,Cout)."""
    xp, (pt, pb, pl, pr), (sh, sw), kshape, xshape = cache
    kh, kw, Cin, Cout = kshape
    B, OH, OW, _ = dy.shape
    dbias = dy.sum(axis=(0, 1, 2))
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::sh, ::sw]
    # (Cin, kh, kw, Cout) -> (kh, kw, Cin, Cout)
    dkernel = np.tensordot(win, dy, axes=([0, 1, 2], [0, 1, 2])).transpose(1, 2, 0, 3)
    dxp = np.zeros_like(xp)
    for i in range(kh):
        for j in range(kw):
            contrib = np.tensordot(dy, kernel[i, j], axes=([3], [1]))
            dxp[:, i : i + OH * sh : sh, j : j + OW * sw : sw, :] += contrib
    H, W = xshape[1], xshape[2]
    dx = dxp[:, pt : pt + H, pl : pl + W, :]
    return dx, dkernel, dbias


def conv2d(x, kernel, bias, stride=1, padding="valid"):
    """2-D cross-correlation over (height, width) with per-channel bias."""
    x = _as_f64(x)
    kernel = _as_f64(kernel)
    bias = _as_f64(bias)
    stride = _normalize_stride(stride, 2)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.ndim != 4:
        raise ShapeError(f"conv2d input must be rank 3 or 4, got {x.ndim}")
    y, _ = _conv2d_forward(x, kernel, bias, stride, padding)
    return y[0] if single else y


# ---------------------------------------------------------------------------
# conv3d

def _conv3d_forward(x, kernel, bias, stride, padding):
    """x: (B,T,H,W,Cin), kernel: (kt,kh,kw,Cin,Cout)."""
    B, T, H, W, Cin = x.shape
    kt, kh, kw, kc, Cout = kernel.shape
    if kc != Cin:
        raise ShapeError(f"kernel expects {kc} input channels, input has {Cin}")
    st, sh, sw = stride
    if padding == "same":
        pads = [_same_pads(T, kt, st), _same_pads(H, kh, sh), _same_pads(W, kw, sw)]
    elif padding == "valid":
        pads = [(0, 0)] * 3
    else:
        raise ShapeError(f"unknown padding mode {padding!r}")
    if any(p != (0, 0) for p in pads):
        xp = np.pad(x, ((0, 0),) + tuple(pads) + ((0, 0),))
    else:
        xp = x
    Tp, Hp, Wp = xp.shape[1:4]
    if kt > Tp or kh > Hp or kw > Wp:
        raise ShapeError(
            f"kernel {kt}x{kh}x{kw} larger than (padded) input {Tp}x{Hp}x{Wp}"
        )
    win = sliding_window_view(xp, (kt, kh, kw), axis=(1, 2, 3))[:, ::st, ::sh, ::sw]
    # win: (B, OT, OH, OW, Cin, kt, kh, kw)
    y = np.tensordot(win, kernel, axes=([4, 5, 6, 7], [3, 0, 1, 2]))
    y += bias
    cache = (xp, pads, stride, kernel.shape, x.shape)
    return y, cache


def _conv3d_backward(dy, kernel, cache):
    xp, pads, (st, sh, sw), kshape, xshape = cache
    kt, kh, kw, Cin, Cout = kshape
    B, OT, OH, OW, _ = dy.shape
    dbias = dy.sum(axis=(0, 1, 2, 3))
    win = sliding_window_view(xp, (kt, kh, kw), axis=(1, 2, 3))[:, ::st, ::sh, ::sw]
    dkernel = np.tensordot(win, dy, axes=([0, 1, 2, 3], [0, 1, 2, 3]))
    dkernel = dkernel.transpose(1, 2, 3, 0, 4)  # (Cin,kt,kh,kw,Cout) -> (kt,kh,kw,Cin,Cout)
    dxp = np.zeros_like(xp)
    for a in range(kt):
        for i in range(kh):
            for j in range(kw):
                contrib = np.tensordot(dy, kernel[a, i, j], axes=([4], [1]))
                dxp[
                    :,
                    a : a + OT * st : st,
                    i : i + OH * sh : sh,
                    j : j + OW * sw : sw,
                    :,
                ] += contrib
    T, H, W = xshape[1:4]
    (pt0, _), (ph0, _), (pw0, _) = pads
    dx = dxp[:, pt0 : pt0 + T, ph0 : ph0 + H, pw0 : pw0 + W, :]
    return dx, dkernel, dbias


def conv3d(x, kernel, bias, stride=1, padding="valid"):
    """3-D cross-correlation over (time, height, width)."""
    x = _as_f64(x)
    kernel = _as_f64(kernel)
    bias = _as_f64(bias)
    stride = _normalize_stride(stride, 3)
    single = x.ndim == 4
    if single:
        x = x[None]
    if x.ndim != 5:
        raise ShapeError(f"conv3d input must be rank 4 or 5, got {x.ndim}")
    y, _ = _conv3d_forward(x, kernel, bias, stride, padding)
    return y[0] if single else y


# ---------------------------------------------------------------------------
# dense

def dense(x, weight, bias):
    """y = x W + b."""
    x = _as_f64(x)
    weight = _as_f64(weight)
    bias = _as_f64(bias)
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError(
            f"dense input width {x.shape[-1]} != weight rows {weight.shape[0]}"
        )
    return x @ weight + bias


# ---------------------------------------------------------------------------
# activations

def relu(x):
    return np.maximum(_as_f64(x), 0.0)


def sigmoid(x):
    x = _as_f64(x)
    # split by sign to stay overflow-free
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def tanh(x):
    return np.tanh(_as_f64(x))


# ---------------------------------------------------------------------------
# pooling

def _maxpool_forward(x, window, stride, spatial_axes):
    nd = len(spatial_axes)
    win = sliding_window_view(x, window, axis=spatial_axes)
    slicer = [slice(None)] * win.ndim
    for ax, s in zip(spatial_axes, stride):
        slicer[ax] = slice(None, None, s)
    win = win[tuple(slicer)]
    flat = win.reshape(win.shape[: win.ndim - nd] + (-1,))
    arg = flat.argmax(axis=-1)
    y = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return y, arg


def maxpool2d(x, window, stride=None):
    """Max over non-padded (height, width) windows; x: (...,H,W,C)."""
    x = _as_f64(x)
    window = _normalize_stride(window, 2)
    stride = window if stride is None else _normalize_stride(stride, 2)
    single = x.ndim == 3
    if single:
        x = x[None]
    H, W = x.shape[1], x.shape[2]
    if window[0] > H or window[1] > W:
        raise ShapeError(f"pool window {window} larger than input {H}x{W}")
    y, _ = _maxpool_forward(x, window, stride, (1, 2))
    return y[0] if single else y


def maxpool3d(x, window, stride=None):
    """Max over (time, height, width) windows; x: (...,T,H,W,C)."""
    x = _as_f64(x)
    window = _normalize_stride(window, 3)
    stride = window if stride is None else _normalize_stride(stride, 3)
    single = x.ndim == 4
    if single:
        x = x[None]
    T, H, W = x.shape[1], x.shape[2], x.shape[3]
    if window[0] > T or window[1] > H or window[2] > W:
        raise ShapeError(f"pool window {window} larger than input {T}x{H}x{W}")
    y, _ = _maxpool_forward(x, window, stride, (1, 2, 3))
    return y[0] if single else y


def _maxpool2d_backward(dy, x, window, stride, arg):
    B, H, W, C = x.shape
    wh, ww = window
    sh, sw = stride
    OH, OW = dy.shape[1], dy.shape[2]
    # arg indexes the flattened (wh, ww) window
    ai, aj = np.divmod(arg, ww)
    b, oh, ow, c = np.indices(dy.shape, sparse=False)
    rows = oh * sh + ai
    cols = ow * sw + aj
    dx = np.zeros_like(x)
    np.add.at(dx, (b, rows, cols, c), dy)
    return dx


def _maxpool3d_backward(dy, x, window, stride, arg):
    wt, wh, ww = window
    st, sh, sw = stride
    at, rem = np.divmod(arg, wh * ww)
    ai, aj = np.divmod(rem, ww)
    b, ot, oh, ow, c = np.indices(dy.shape, sparse=False)
    dx = np.zeros_like(x)
    np.add.at(dx, (b, ot * st + at, oh * sh + ai, ow * sw + aj, c), dy)
    return dx


# ---------------------------------------------------------------------------
# ConvLSTM step (gate order: input, forget, candidate, output)

def _split_gates(z, cout):
    return z[..., :cout], z[..., cout : 2 * cout], z[..., 2 * cout : 3 * cout], z[..., 3 * cout :]


def convlstm2d_step(x_t, h_prev, c_prev, kernel, recurrent_kernel, bias):
    """One convolutional-LSTM step.

    x_t: (H,W,Cin) or (B,H,W,Cin); h_prev/c_prev: matching (.., H, W, Cout).
    kernel: (kh,kw,Cin,4*Cout), recurrent_kernel: (kh,kw,Cout,4*Cout),
    bias: (4*Cout,). Gate convolutions are stride-1, "same" padding.
    Returns (h_t, c_t).
    """
    x_t = _as_f64(x_t)
    h_prev = _as_f64(h_prev)
    c_prev = _as_f64(c_prev)
    single = x_t.ndim == 3
    if single:
        x_t, h_prev, c_prev = x_t[None], h_prev[None], c_prev[None]
    if x_t.shape[1:3] != h_prev.shape[1:3] or h_prev.shape != c_prev.shape:
        raise ShapeError(
            f"state/input spatial mismatch: x {x_t.shape[1:3]}, "
            f"h {h_prev.shape[1:3]}, c {c_prev.shape[1:3]}"
        )
    cout = h_prev.shape[-1]
    kernel = _as_f64(kernel)
    recurrent_kernel = _as_f64(recurrent_kernel)
    bias = _as_f64(bias)
    zx, _ = _conv2d_forward(x_t, kernel, np.zeros(4 * cout), (1, 1), "same")
    zh, _ = _conv2d_forward(h_prev, recurrent_kernel, np.zeros(4 * cout), (1, 1), "same")
    z = zx + zh + bias
    zi, zf, zg, zo = _split_gates(z, cout)
    i = sigmoid(zi)
    f = sigmoid(zf)
    g = tanh(zg)
    o = sigmoid(zo)
    c_t = f * c_prev + i * g
    h_t = o * np.tanh(c_t)
    if single:
        return h_t[0], c_t[0]
    return h_t, c_t
