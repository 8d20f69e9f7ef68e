"""Differentiable operations on Tensors.

Every function builds a graph node via ``make_node`` with a hand-written
vector-Jacobian product. All of them are covered by the finite-difference
suites in ``gradcheck``.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from . import convnd
from .tensor import Tensor, make_node

__all__ = [
    "conv", "conv_transpose", "batch_norm", "relu", "mish", "activate",
    "softmax_along", "sample_bilinear_x", "resize", "smooth_l1",
]


# -- convolution --------------------------------------------------------

def conv(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None,
         stride=1, padding=0, dilation=1) -> Tensor:
    """Cross-correlation over 2 or 3 spatial dims (from weight.ndim)."""
    bias_data = bias.data if bias is not None else None
    y = convnd.conv_forward(x.data, weight.data, bias_data, stride, padding, dilation)
    parents = (x, weight) if bias is None else (x, weight, bias)

    def vjp(g):
        gx, gw, gb = convnd.conv_backward(
            x.data, weight.data, g, stride, padding, dilation, with_bias=bias is not None)
        return (gx, gw) if bias is None else (gx, gw, gb)

    return make_node(y, parents, vjp)


def conv_transpose(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None,
                   stride=1, padding=0, output_padding=0, dilation=1) -> Tensor:
    """Transposed convolution; weight layout [C_in, C_out, *k]."""
    bias_data = bias.data if bias is not None else None
    y = convnd.conv_transpose_forward(
        x.data, weight.data, bias_data, stride, padding, output_padding, dilation)
    parents = (x, weight) if bias is None else (x, weight, bias)

    def vjp(g):
        gx, gw, gb = convnd.conv_transpose_backward(
            x.data, weight.data, g, stride, padding, output_padding, dilation,
            with_bias=bias is not None)
        return (gx, gw) if bias is None else (gx, gw, gb)

    return make_node(y, parents, vjp)


def convolution(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None,
                stride=1, padding=0, dilation=1, transposed: bool = False,
                output_padding=0) -> Tensor:
    """Unified entry point; dispatches on the ``transposed`` flag."""
    if transposed:
        return conv_transpose(x, weight, bias, stride, padding, output_padding, dilation)
    return conv(x, weight, bias, stride, padding, dilation)


# -- normalization ------------------------------------------------------

def batch_norm(x: Tensor, running_mean: np.ndarray, running_var: np.ndarray,
               gamma: Tensor, beta: Tensor, training: bool,
               momentum: float = 0.1, epsilon: float = 1e-5) -> Tensor:
    """Per-channel normalization over (batch, spatial) with affine transform.

    Training mode normalizes by batch statistics (biased variance) and
    updates the running buffers in place; eval mode uses the buffers.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,) or running_mean.shape != (c,):
        raise ValueError(f"per-channel tensors must have extent {c}")
    axes = (0,) + tuple(range(2, x.ndim))
    bshape = (1, c) + (1,) * (x.ndim - 2)

    if training:
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mu = running_mean.astype(x.dtype, copy=False)
        var = running_var.astype(x.dtype, copy=False)

    inv_std = 1.0 / np.sqrt(var + epsilon)
    xhat = (x.data - mu.reshape(bshape)) * inv_std.reshape(bshape)
    y = gamma.data.reshape(bshape) * xhat + beta.data.reshape(bshape)

    def vjp(g):
        dgamma = (g * xhat).sum(axis=axes)
        dbeta = g.sum(axis=axes)
        dxhat = g * gamma.data.reshape(bshape)
        if training:
            m = x.size // c
            dx = (dxhat - dxhat.mean(axis=axes).reshape(bshape)
                  - xhat * (dxhat * xhat).sum(axis=axes).reshape(bshape) / m)
            dx = dx * inv_std.reshape(bshape)
        else:
            dx = dxhat * inv_std.reshape(bshape)
        return dx, dgamma, dbeta

    return make_node(y, (x, gamma, beta), vjp)


# -- activations --------------------------------------------------------

def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return make_node(np.where(mask, x.data, 0), (x,), lambda g: (g * mask,))


def _softplus(x: np.ndarray) -> np.ndarray:
    # switches to identity for large inputs to dodge exp overflow
    return np.where(x > 20.0, x, np.log1p(np.exp(np.minimum(x, 20.0))))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def mish(x: Tensor) -> Tensor:
    """x * tanh(softplus(x)); smooth, non-monotonic, bounded below."""
    t = np.tanh(_softplus(x.data))
    y = x.data * t

    def vjp(g):
        return (g * (t + x.data * (1.0 - t * t) * _sigmoid(x.data)),)

    return make_node(y, (x,), vjp)


_ACTIVATIONS = {"relu": relu, "mish": mish}


def activate(x: Tensor, kind: str) -> Tensor:
    try:
        return _ACTIVATIONS[kind](x)
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}; expected one of {sorted(_ACTIVATIONS)}")


# -- softmax -------------------------------------------------------------

def softmax_along(x: Tensor, axis: int) -> Tensor:
    if not -x.ndim <= axis < x.ndim:
        raise ValueError(f"axis {axis} invalid for shape {x.shape}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return make_node(y, (x,), vjp)


# -- horizontal bilinear sampling ----------------------------------------

def sample_bilinear_x(feature: Tensor, x_offsets: Tensor) -> Tensor:
    """Warp along x: output(x) linearly interpolates feature at x - offset.

    feature: [N, C, H, W]; x_offsets: [N, H, W]. Reads outside [0, W-1]
    contribute zero (zeros border). Differentiable in both arguments.
    """
    f = feature.data
    n, c, h, w = f.shape
    if x_offsets.shape != (n, h, w):
        raise ValueError(f"offsets shape {x_offsets.shape} != {(n, h, w)}")
    src = np.arange(w, dtype=f.dtype)[None, None, :] - x_offsets.data
    i0 = np.floor(src).astype(np.int64)
    t = (src - i0).astype(f.dtype)
    v0 = (i0 >= 0) & (i0 <= w - 1)
    v1 = (i0 + 1 >= 0) & (i0 + 1 <= w - 1)
    c0 = np.clip(i0, 0, w - 1)
    c1 = np.clip(i0 + 1, 0, w - 1)

    def gather(idx):
        ib = np.broadcast_to(idx[:, None, :, :], f.shape)
        return np.take_along_axis(f, ib, axis=3)

    g0 = gather(c0) * v0[:, None, :, :]
    g1 = gather(c1) * v1[:, None, :, :]
    te = t[:, None, :, :]
    y = (1.0 - te) * g0 + te * g1

    def vjp(g):
        gf = np.zeros_like(f)
        nn = np.broadcast_to(np.arange(n)[:, None, None, None], f.shape)
        cc = np.broadcast_to(np.arange(c)[None, :, None, None], f.shape)
        hh = np.broadcast_to(np.arange(h)[None, None, :, None], f.shape)
        c0b = np.broadcast_to(c0[:, None, :, :], f.shape)
        c1b = np.broadcast_to(c1[:, None, :, :], f.shape)
        np.add.at(gf, (nn, cc, hh, c0b), g * (1.0 - te) * v0[:, None, :, :])
        np.add.at(gf, (nn, cc, hh, c1b), g * te * v1[:, None, :, :])
        # d out / d src = f(i0+1) - f(i0) on the valid interval; d src / d off = -1
        goff = -(g * (g1 - g0)).sum(axis=1)
        return gf, goff.astype(x_offsets.dtype, copy=False)

    return make_node(y, (feature, x_offsets), vjp)


# -- resize ----------------------------------------------------------------

def _axis_plan(in_len: int, out_len: int):
    """Source indices/weights for 1-d linear interpolation, half-pixel convention."""
    scale = in_len / out_len
    src = (np.arange(out_len, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, in_len - 1.0)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, in_len - 1)
    w1 = src - i0
    return i0, i1, 1.0 - w1, w1


def resize(x: Tensor, target_spatial: Sequence[int], mode: str) -> Tensor:
    """Linear resampling (align-corners-false). bilinear expects [N,C,H,W],
    trilinear [N,C,D,H,W]; matched-size axes pass through untouched."""
    nsp = {"bilinear": 2, "trilinear": 3}.get(mode)
    if nsp is None:
        raise ValueError(f"unknown resize mode {mode!r}")
    target = tuple(int(t) for t in target_spatial)
    if len(target) != nsp or x.ndim != nsp + 2:
        raise ValueError(f"{mode} resize needs {nsp} target extents and ndim {nsp + 2}")
    if any(t < 1 for t in target):
        raise ValueError("non-positive target extent")

    plans = []
    data = x.data
    for i, out_len in enumerate(target):
        axis = 2 + i
        in_len = data.shape[axis]
        if in_len == out_len:
            plans.append(None)
            continue
        i0, i1, w0, w1 = _axis_plan(in_len, out_len)
        plans.append((axis, in_len, i0, i1,
                      w0.astype(x.dtype), w1.astype(x.dtype)))
        shape = [1] * data.ndim
        shape[axis] = out_len
        data = (np.take(data, i0, axis=axis) * w0.reshape(shape)
                + np.take(data, i1, axis=axis) * w1.reshape(shape))

    def vjp(g):
        for plan in reversed(plans):
            if plan is None:
                continue
            axis, in_len, i0, i1, w0, w1 = plan
            shape = [1] * g.ndim
            shape[axis] = g.shape[axis]
            gin_shape = list(g.shape)
            gin_shape[axis] = in_len
            gin = np.zeros(gin_shape, dtype=g.dtype)
            gm = np.moveaxis(gin, axis, -1)
            gsrc = np.moveaxis(g, axis, -1)
            np.add.at(gm, (Ellipsis, i0), gsrc * w0)
            np.add.at(gm, (Ellipsis, i1), gsrc * w1)
            g = gin
        return (g,)

    return make_node(np.ascontiguousarray(data), (x,), vjp)


# -- losses ------------------------------------------------------------------

def smooth_l1(x: Tensor) -> Tensor:
    """Elementwise 0.5*x^2 for |x| < 1, |x| - 0.5 otherwise."""
    a = np.abs(x.data)
    y = np.where(a < 1.0, 0.5 * x.data * x.data, a - 0.5)
    d = np.clip(x.data, -1.0, 1.0)
    return make_node(y, (x,), lambda g: (g * d,))
