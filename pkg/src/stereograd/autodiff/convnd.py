"""n-dimensional convolution kernels on raw numpy arrays.

Forward and transposed convolution for 2 or 3 spatial dims with stride,
zero padding and dilation, plus their exact gradients. Layout follows the
usual convention: inputs ``[N, C, *spatial]``, weights ``[C_out, C_in, *k]``
(``[C_in, C_out, *k]`` for transposed).

The implementation extracts strided/dilated windows as a zero-copy view and
contracts them with the weight via ``tensordot``, which routes the heavy
lifting to BLAS. Gradients reuse the same machinery: grad-input is a stride-1
correlation of the (zero-stuffed) output gradient with the flipped kernel.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _tuplize(v, n: int) -> tuple:
    if isinstance(v, (tuple, list)):
        if len(v) != n:
            raise ValueError(f"expected {n} values, got {v}")
        return tuple(int(x) for x in v)
    return (int(v),) * n


def conv_out_extent(size: int, k: int, stride: int, pad: int, dil: int) -> int:
    return (size + 2 * pad - dil * (k - 1) - 1) // stride + 1


def _windows(xp: np.ndarray, kernel: tuple, stride: tuple, dilation: tuple) -> np.ndarray:
    """Strided+dilated sliding windows of a padded input (a view)."""
    nsp = len(kernel)
    eff = tuple((k - 1) * d + 1 for k, d in zip(kernel, dilation))
    win = sliding_window_view(xp, eff, axis=tuple(range(2, 2 + nsp)))
    pos = tuple(slice(None, None, s) for s in stride)
    win = win[(slice(None), slice(None)) + pos]
    tap = tuple(slice(None, None, d) for d in dilation)
    return win[(Ellipsis,) + tap]


def conv_forward(x, w, bias, stride, padding, dilation):
    """Cross-correlation. Returns the output; gradients recompute the padded
    input view, so no cache object is needed beyond the inputs themselves."""
    nsp = w.ndim - 2
    if x.ndim != nsp + 2:
        raise ValueError(f"input ndim {x.ndim} does not match weight ndim {w.ndim}")
    if x.shape[1] != w.shape[1]:
        raise ValueError(f"input channels {x.shape[1]} != weight channels {w.shape[1]}")
    stride = _tuplize(stride, nsp)
    padding = _tuplize(padding, nsp)
    dilation = _tuplize(dilation, nsp)
    if any(d < 1 for d in dilation):
        raise ValueError("dilation must be >= 1")
    kernel = w.shape[2:]
    for i in range(nsp):
        if conv_out_extent(x.shape[2 + i], kernel[i], stride[i], padding[i], dilation[i]) < 1:
            raise ValueError(
                f"non-positive output extent on axis {i}: input {x.shape[2 + i]}, "
                f"kernel {kernel[i]}, stride {stride[i]}, pad {padding[i]}"
            )

    if kernel == (1,) * nsp and stride == (1,) * nsp and padding == (0,) * nsp:
        # pointwise fast path used by the 1x1(x1) projection layers
        y = np.tensordot(w.reshape(w.shape[:2]), x, axes=(1, 1))
        y = np.moveaxis(y, 0, 1)
    else:
        xp = np.pad(x, [(0, 0), (0, 0)] + [(p, p) for p in padding])
        win = _windows(xp, kernel, stride, dilation)
        k_axes_win = tuple(range(2 + nsp, 2 + 2 * nsp))
        k_axes_w = tuple(range(2, 2 + nsp))
        y = np.tensordot(win, w, axes=((1,) + k_axes_win, (1,) + k_axes_w))
        y = np.moveaxis(y, -1, 1)
    if bias is not None:
        y = y + bias.reshape((1, -1) + (1,) * nsp)
    return np.ascontiguousarray(y)


def conv_backward(x, w, gy, stride, padding, dilation, with_bias):
    """Gradients of conv_forward w.r.t. (x, w, bias)."""
    nsp = w.ndim - 2
    stride = _tuplize(stride, nsp)
    padding = _tuplize(padding, nsp)
    dilation = _tuplize(dilation, nsp)
    kernel = w.shape[2:]
    spatial_axes = tuple(range(2, 2 + nsp))

    if kernel == (1,) * nsp and stride == (1,) * nsp and padding == (0,) * nsp:
        gw = np.tensordot(gy, x, axes=((0,) + spatial_axes, (0,) + spatial_axes))
        gw = gw.reshape(w.shape)
        gx = np.tensordot(w.reshape(w.shape[:2]), gy, axes=(0, 1))
        gx = np.ascontiguousarray(np.moveaxis(gx, 0, 1))
    else:
        xp = np.pad(x, [(0, 0), (0, 0)] + [(p, p) for p in padding])
        win = _windows(xp, kernel, stride, dilation)
        # grad weight: contract batch+positions of gy with the input windows
        gw = np.tensordot(gy, win, axes=((0,) + spatial_axes, (0,) + spatial_axes))
        # grad input: zero-stuff gy to the full position grid, correlate with
        # the channel-swapped, spatially flipped kernel at stride 1
        eff = tuple((k - 1) * d + 1 for k, d in zip(kernel, dilation))
        full = tuple(xp.shape[2 + i] - eff[i] + 1 for i in range(nsp))
        gd = np.zeros(gy.shape[:2] + full, dtype=gy.dtype)
        gd[(slice(None), slice(None)) + tuple(slice(None, None, s) for s in stride)] = gy
        wt = np.swapaxes(w, 0, 1)
        wt = wt[(slice(None), slice(None)) + (slice(None, None, -1),) * nsp]
        gxp = conv_forward(gd, np.ascontiguousarray(wt), None, 1,
                           tuple(e - 1 for e in eff), dilation)
        crop = tuple(slice(padding[i], padding[i] + x.shape[2 + i]) for i in range(nsp))
        gx = np.ascontiguousarray(gxp[(slice(None), slice(None)) + crop])
    gb = gy.sum(axis=(0,) + spatial_axes) if with_bias else None
    return gx, gw, gb


def conv_transpose_out_extent(size: int, k: int, stride: int, pad: int,
                              dil: int, outpad: int) -> int:
    return (size - 1) * stride - 2 * pad + dil * (k - 1) + 1 + outpad


def _scatter_stride(x, stride, outpad):
    """Insert stride-1 zeros between elements along every spatial axis."""
    nsp = x.ndim - 2
    full = tuple((x.shape[2 + i] - 1) * stride[i] + 1 + outpad[i] for i in range(nsp))
    gd = np.zeros(x.shape[:2] + full, dtype=x.dtype)
    gd[(slice(None), slice(None)) + tuple(slice(None, None, s) for s in stride)] = x
    return gd


def conv_transpose_forward(x, w, bias, stride, padding, output_padding, dilation):
    """Transposed convolution; weight layout ``[C_in, C_out, *k]``."""
    nsp = w.ndim - 2
    if x.shape[1] != w.shape[0]:
        raise ValueError(f"input channels {x.shape[1]} != weight in-channels {w.shape[0]}")
    stride = _tuplize(stride, nsp)
    padding = _tuplize(padding, nsp)
    output_padding = _tuplize(output_padding, nsp)
    dilation = _tuplize(dilation, nsp)
    kernel = w.shape[2:]
    eff = tuple((k - 1) * d + 1 for k, d in zip(kernel, dilation))
    for i in range(nsp):
        if output_padding[i] >= stride[i] and output_padding[i] != 0:
            raise ValueError("output_padding must be smaller than stride")
        if eff[i] - 1 - padding[i] < 0:
            raise ValueError("padding exceeds effective kernel extent")
        if conv_transpose_out_extent(x.shape[2 + i], kernel[i], stride[i],
                                     padding[i], dilation[i], output_padding[i]) < 1:
            raise ValueError("non-positive transposed-conv output extent")

    gd = _scatter_stride(x, stride, output_padding)
    wt = np.swapaxes(w, 0, 1)
    wt = wt[(slice(None), slice(None)) + (slice(None, None, -1),) * nsp]
    pad1 = tuple(eff[i] - 1 - padding[i] for i in range(nsp))
    return conv_forward(gd, np.ascontiguousarray(wt), bias, 1, pad1, dilation)


def conv_transpose_backward(x, w, gy, stride, padding, output_padding, dilation, with_bias):
    """Gradients of conv_transpose_forward w.r.t. (x, w, bias)."""
    nsp = w.ndim - 2
    stride = _tuplize(stride, nsp)
    padding = _tuplize(padding, nsp)
    output_padding = _tuplize(output_padding, nsp)
    dilation = _tuplize(dilation, nsp)
    kernel = w.shape[2:]
    eff = tuple((k - 1) * d + 1 for k, d in zip(kernel, dilation))
    spatial_axes = tuple(range(2, 2 + nsp))

    # transpose of a transpose is the forward conv
    gx = conv_forward(gy, w, None, stride, padding, dilation)

    # grad weight via the scatter+correlate construction used in forward
    gd = _scatter_stride(x, stride, output_padding)
    pad1 = tuple(eff[i] - 1 - padding[i] for i in range(nsp))
    gdp = np.pad(gd, [(0, 0), (0, 0)] + [(p, p) for p in pad1])
    win = _windows(gdp, kernel, (1,) * nsp, dilation)
    gwt = np.tensordot(gy, win, axes=((0,) + spatial_axes, (0,) + spatial_axes))
    gw = np.swapaxes(gwt, 0, 1)
    gw = np.ascontiguousarray(gw[(slice(None), slice(None)) + (slice(None, None, -1),) * nsp])

    gb = gy.sum(axis=(0,) + spatial_axes) if with_bias else None
    return gx, gw, gb
