import itertools

import numpy as np
import pytest

from stereograd import autodiff as ad
from stereograd.autodiff import convnd
from stereograd.autodiff import functional as F


def loop_conv2d(x, w, stride, pad, dil):
    """Reference cross-correlation, quadruple loop."""
    n, ci, h, ww = x.shape
    co = w.shape[0]
    kh, kw = w.shape[2:]
    oh = (h + 2 * pad[0] - dil[0] * (kh - 1) - 1) // stride[0] + 1
    ow = (ww + 2 * pad[1] - dil[1] * (kw - 1) - 1) // stride[1] + 1
    xp = np.pad(x, [(0, 0), (0, 0), (pad[0], pad[0]), (pad[1], pad[1])])
    out = np.zeros((n, co, oh, ow), dtype=x.dtype)
    for b, o, i, j in itertools.product(range(n), range(co), range(oh), range(ow)):
        acc = 0.0
        for c, u, v in itertools.product(range(ci), range(kh), range(kw)):
            acc += xp[b, c, i * stride[0] + u * dil[0], j * stride[1] + v * dil[1]] * w[o, c, u, v]
        out[b, o, i, j] = acc
    return out


def test_identity_kernel_1d_row():
    x = ad.tensor(np.array([[[[1.0, 2, 3, 4, 5]]]]))
    w = ad.tensor(np.ones((1, 1, 1, 1)))
    y = F.conv(x, w)
    np.testing.assert_allclose(y.data, x.data)


def test_boundary_average_kernel():
    # 1x3 averaging kernel with zero padding: endpoints see one zero
    x = ad.tensor(np.array([[[[1.0, 2, 3, 4, 5]]]]))
    w = ad.tensor(np.full((1, 1, 1, 3), 1.0 / 3.0))
    y = F.conv(x, w, stride=1, padding=(0, 1))
    np.testing.assert_allclose(y.data[0, 0, 0], [1, 2, 3, 4, 3])


def test_stride2_output_extent():
    assert convnd.conv_out_extent(8, 3, 2, 1, 1) == 4


@pytest.mark.parametrize("shape,kernel,stride,pad,dil", [
    ((1, 2, 5, 6), (3, 3), (1, 1), (1, 1), (1, 1)),
    ((2, 3, 7, 5), (3, 3), (2, 2), (1, 1), (1, 1)),
    ((1, 2, 9, 9), (3, 3), (1, 1), (2, 2), (2, 2)),
    ((1, 1, 6, 8), (2, 3), (2, 1), (0, 1), (1, 2)),
])
def test_conv2d_matches_loop_oracle(shape, kernel, stride, pad, dil):
    rng = np.random.default_rng(42)
    x = rng.standard_normal(shape)
    w = rng.standard_normal((4, shape[1]) + kernel)
    got = convnd.conv_forward(x, w, None, stride, pad, dil)
    want = loop_conv2d(x, w, stride, pad, dil)
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_conv3d_matches_2d_on_singleton_depth():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((1, 2, 1, 6, 7))
    w = rng.standard_normal((3, 2, 1, 3, 3))
    got = convnd.conv_forward(x, w, None, 1, (0, 1, 1), 1)
    want = loop_conv2d(x[:, :, 0], w[:, :, 0], (1, 1), (1, 1), (1, 1))
    np.testing.assert_allclose(got[:, :, 0], want, atol=1e-12)


def test_identity_kernel_any_shape():
    rng = np.random.default_rng(0)
    for shape, k in [((1, 3, 8, 9), 3), ((2, 2, 5, 5), 5), ((1, 2, 4, 6, 8), 3)]:
        nsp = len(shape) - 2
        c = shape[1]
        w = np.zeros((c, c) + (k,) * nsp)
        center = (k // 2,) * nsp
        for ch in range(c):
            w[(ch, ch) + center] = 1.0
        x = rng.standard_normal(shape)
        y = convnd.conv_forward(x, w, None, 1, k // 2, 1)
        np.testing.assert_allclose(y, x, atol=1e-12)


def test_transposed_inverts_stride2_shape():
    # stride-2 downsample then transposed upsample with target size restores extents
    rng = np.random.default_rng(1)
    for extent in (6, 7, 9, 16):
        x = ad.tensor(rng.standard_normal((1, 2, extent, extent)).astype(np.float32))
        conv = ad.Conv2d(2, 4, 3, stride=2, padding=1, rng=rng)
        down = conv(x)
        up = ad.ConvTranspose2d(4, 2, 3, stride=2, padding=1, rng=rng)(
            down, output_size=(extent, extent))
        assert up.shape == (1, 2, extent, extent)


def test_transposed_matches_manual_1d():
    # [a x0, b x0 + a x1, b x1] for kernel [a, b], stride 1
    x = np.array([[[[2.0, 3.0]]]])
    w = np.array([[[[5.0, 7.0]]]])  # layout [ci, co, kh, kw]
    y = convnd.conv_transpose_forward(x, w, None, 1, 0, 0, 1)
    np.testing.assert_allclose(y[0, 0, 0], [10.0, 29.0, 21.0])


def test_channel_mismatch_raises():
    x = np.zeros((1, 3, 4, 4))
    w = np.zeros((2, 4, 3, 3))
    with pytest.raises(ValueError):
        convnd.conv_forward(x, w, None, 1, 1, 1)


def test_nonpositive_extent_raises():
    x = np.zeros((1, 1, 2, 2))
    w = np.zeros((1, 1, 5, 5))
    with pytest.raises(ValueError):
        convnd.conv_forward(x, w, None, 1, 0, 1)


@pytest.mark.parametrize("transposed", [False, True])
@pytest.mark.parametrize("nsp", [2, 3])
def test_conv_gradients_match_finite_differences(nsp, transposed):
    rng = np.random.default_rng(5)
    shape = (2, 2) + (5,) * nsp if nsp == 2 else (1, 2) + (4, 5, 5)
    x = ad.tensor(rng.standard_normal(shape), dtype=np.float64)
    wshape = (2, 2) + (2,) * nsp if not transposed else (2, 2) + (2,) * nsp
    w = ad.tensor(rng.standard_normal(wshape) * 0.5, dtype=np.float64)
    b = ad.tensor(rng.standard_normal(2) * 0.1, dtype=np.float64)

    def closure(xx, ww, bb):
        return F.convolution(xx, ww, bb, stride=2, padding=1, transposed=transposed,
                             output_padding=1 if transposed else 0)

    report = ad.check_gradients(closure, [x, w, b], tolerance=1e-4)
    assert report.passed, f"max rel error {report.max_rel_error:.3e}"
