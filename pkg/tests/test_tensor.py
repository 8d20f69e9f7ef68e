import numpy as np
import pytest

from stereograd import autodiff as ad
from stereograd.autodiff import functional as F


def test_scalar_square_gradient():
    x = ad.tensor([3.0], requires_grad=True)
    loss = (x * x).sum()
    loss.backward()
    np.testing.assert_allclose(x.grad, [6.0])


def test_product_gradients():
    a = ad.tensor([1.0, 2.0, 3.0], requires_grad=True)
    b = ad.tensor([4.0, 5.0, 6.0], requires_grad=True)
    (a * b).sum().backward()
    np.testing.assert_allclose(a.grad, b.data)
    np.testing.assert_allclose(b.grad, a.data)


def test_two_branch_accumulation():
    # a tensor feeding two branches gets the sum of per-branch gradients
    x = ad.tensor([2.0, -1.0], requires_grad=True)
    y = (x * 3.0).sum() + (x * x).sum()
    y.backward()
    np.testing.assert_allclose(x.grad, 3.0 + 2.0 * x.data)


def test_backward_twice_raises():
    x = ad.tensor([1.0], requires_grad=True)
    loss = (x * x).sum()
    loss.backward()
    with pytest.raises(RuntimeError):
        loss.backward()


def test_backward_needs_scalar():
    x = ad.tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ValueError):
        (x * x).backward()


def test_grad_accumulates_across_graphs():
    x = ad.tensor([1.0], requires_grad=True)
    (x * 2.0).sum().backward()
    (x * 3.0).sum().backward()
    np.testing.assert_allclose(x.grad, [5.0])


def test_no_grad_builds_no_graph():
    x = ad.tensor([1.0], requires_grad=True)
    with ad.no_grad():
        y = x * x
    assert y.is_leaf() and not y.requires_grad


def test_broadcast_backward_unbroadcasts():
    a = ad.tensor(np.ones((2, 3)), requires_grad=True)
    b = ad.tensor(np.ones((1, 3)), requires_grad=True)
    (a * b).sum().backward()
    assert a.grad.shape == (2, 3)
    assert b.grad.shape == (1, 3)
    np.testing.assert_allclose(b.grad, 2.0 * np.ones((1, 3)))


def test_concat_backward_splits():
    a = ad.tensor(np.ones((2, 2)), requires_grad=True)
    b = ad.tensor(np.ones((3, 2)), requires_grad=True)
    out = ad.concat([a, b], axis=0)
    (out * np.arange(10.0).reshape(5, 2)).sum().backward()
    np.testing.assert_allclose(a.grad, [[0, 1], [2, 3]])
    np.testing.assert_allclose(b.grad, [[4, 5], [6, 7], [8, 9]])


def test_mean_and_reshape_roundtrip():
    x = ad.tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    y = x.reshape(3, 2).mean()
    y.backward()
    np.testing.assert_allclose(x.grad, np.full((2, 3), 1.0 / 6.0))


def test_clamp_gradient_masks_outside():
    x = ad.tensor([-2.0, 0.5, 3.0], requires_grad=True)
    x.clamp(0.0, 1.0).sum().backward()
    np.testing.assert_allclose(x.grad, [0.0, 1.0, 0.0])


def test_finite_outputs_on_finite_inputs():
    ad.set_nan_checks(True)
    try:
        rng = np.random.default_rng(3)
        x = ad.tensor(rng.standard_normal((4, 5)) * 1e4)
        for fn in (F.relu, F.mish, lambda t: F.softmax_along(t, 1), F.smooth_l1):
            out = fn(x)
            assert np.all(np.isfinite(out.data))
    finally:
        ad.set_nan_checks(False)
