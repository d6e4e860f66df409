"""Layer tests against brute-force oracles and finite differences."""

import numpy as np
import numpy.testing as npt
import pytest

from uisal.errors import ConfigError, ShapeError
from uisal.nn import _kernels, layers
from uisal.rng import SeededRng


def conv_oracle(x, w, b):
    """Direct six-nested-loop convolution (stride 1, zero pad 1)."""
    cin, h, wd = x.shape
    cout = w.shape[0]
    y = np.zeros((cout, h, wd), dtype=np.float64)
    for co in range(cout):
        for oh in range(h):
            for ow in range(wd):
                acc = float(b[co])
                for ci in range(cin):
                    for kh in range(3):
                        for kw in range(3):
                            ih, iw = oh + kh - 1, ow + kw - 1
                            if 0 <= ih < h and 0 <= iw < wd:
                                acc += w[co, ci, kh, kw] * x[ci, ih, iw]
                y[co, oh, ow] = acc
    return y


def pool_oracle(x):
    """Brute-force disjoint 3x3 window max."""
    c, h, wd = x.shape
    y = np.empty((c, h // 3, wd // 3), dtype=x.dtype)
    for ci in range(c):
        for oh in range(h // 3):
            for ow in range(wd // 3):
                y[ci, oh, ow] = x[ci, 3 * oh : 3 * oh + 3, 3 * ow : 3 * ow + 3].max()
    return y


def fd_gradient(f, x, eps=1e-5):
    """Central-difference gradient of scalar f at x (mutates and restores x)."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        lp = f()
        flat[i] = orig - eps
        lm = f()
        flat[i] = orig
        gflat[i] = (lp - lm) / (2 * eps)
    return g


# ---------------------------------------------------------------------------
# conv2d
# ---------------------------------------------------------------------------


def test_conv_center_tap_kernel():
    x = np.array([[[2.0]]])
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 1, 1] = 3.0
    b = np.array([1.0])
    y, _ = layers.conv2d_forward(x, w, b)
    npt.assert_allclose(y, [[[7.0]]])


def test_conv_preserves_spatial_dims():
    rng = SeededRng(0)
    x = rng.uniform((3, 288, 162))
    w = layers.he_uniform(rng, (3, 3, 3, 3), fan_in=27, dtype=np.float64)
    b = np.zeros(3)
    y, _ = layers.conv2d_forward(x, w, b)
    assert y.shape == (3, 288, 162)


def test_conv_shape_preserved_random_dims():
    for seed in range(25):
        rng = SeededRng(seed)
        h = int(rng.integers(1, 12, 1)[0])
        wd = int(rng.integers(1, 12, 1)[0])
        cin = int(rng.integers(1, 4, 1)[0])
        cout = int(rng.integers(1, 4, 1)[0])
        x = rng.normal((cin, h, wd))
        w = rng.normal((cout, cin, 3, 3))
        b = rng.normal(cout)
        y, _ = layers.conv2d_forward(x, w, b)
        assert y.shape == (cout, h, wd)


def test_conv_matches_bruteforce_oracle():
    for seed in range(10):
        rng = SeededRng(seed)
        x = rng.normal((2, 5, 5))
        w = rng.normal((3, 2, 3, 3))
        b = rng.normal(3)
        y, _ = layers.conv2d_forward(x, w, b)
        want = conv_oracle(x, w, b)
        assert np.max(np.abs(y - want)) < 1e-6


def test_conv_batched_matches_per_image():
    rng = SeededRng(3)
    x = rng.normal((4, 2, 6, 7))
    w = rng.normal((5, 2, 3, 3))
    b = rng.normal(5)
    y, _ = layers.conv2d_forward(x, w, b)
    for n in range(4):
        yn, _ = layers.conv2d_forward(x[n], w, b)
        npt.assert_allclose(y[n], yn, rtol=0, atol=1e-12)


def test_conv_channel_mismatch_raises():
    with pytest.raises(ShapeError):
        layers.conv2d_forward(np.zeros((2, 4, 4)), np.zeros((1, 3, 3, 3)), np.zeros(1))


def test_conv_jit_and_numpy_paths_agree():
    rng = SeededRng(1)
    x = rng.normal((2, 3, 10, 11))
    w = rng.normal((4, 3, 3, 3))
    b = rng.normal(4)
    xpad = np.zeros((2, 3, 12, 13))
    xpad[:, :, 1:-1, 1:-1] = x
    via_np = _kernels._conv3x3_forward_np(xpad, w, b)
    via_active = _kernels.conv3x3_forward(xpad, w, b)
    npt.assert_allclose(via_active, via_np, rtol=0, atol=1e-12)
    gy = rng.normal(via_np.shape)
    npt.assert_allclose(
        _kernels.conv3x3_grad_input(gy, w),
        _kernels._conv3x3_grad_input_np(gy, w),
        rtol=0,
        atol=1e-12,
    )
    gw_a, gb_a = _kernels.conv3x3_grad_weights(xpad, gy)
    gw_n, gb_n = _kernels._conv3x3_grad_weights_np(xpad, gy)
    npt.assert_allclose(gw_a, gw_n, rtol=1e-12, atol=1e-10)
    npt.assert_allclose(gb_a, gb_n, rtol=1e-12, atol=1e-10)


def test_conv_gradients_match_finite_differences():
    for seed in range(5):
        rng = SeededRng(seed)
        x = rng.normal((2, 4, 5))
        w = rng.normal((3, 2, 3, 3)) * 0.5
        b = rng.normal(3) * 0.1
        t = rng.normal((3, 4, 5))

        def loss():
            y, _ = layers.conv2d_forward(x, w, b)
            return float(np.sum((y - t) ** 2))

        y, cache = layers.conv2d_forward(x, w, b)
        gx, gw, gb = layers.conv2d_backward(2.0 * (y - t), cache, w)
        for arr, got in ((x, gx), (w, gw), (b, gb)):
            want = fd_gradient(loss, arr)
            denom = np.maximum(np.abs(want), 1e-6)
            assert np.max(np.abs(got - want) / denom) < 1e-4


# ---------------------------------------------------------------------------
# maxpool3
# ---------------------------------------------------------------------------


def test_maxpool_single_window():
    x = np.arange(1.0, 10.0).reshape(1, 3, 3)
    y, _ = layers.maxpool3_forward(x)
    npt.assert_allclose(y, [[[9.0]]])


def test_maxpool_shape_contract():
    x = SeededRng(0).uniform((3, 288, 162))
    y, _ = layers.maxpool3_forward(x)
    assert y.shape == (3, 96, 54)


def test_maxpool_matches_bruteforce_oracle():
    for seed in range(10):
        x = SeededRng(seed).normal((1, 9, 9))
        y, _ = layers.maxpool3_forward(x)
        npt.assert_array_equal(y, pool_oracle(x))


def test_maxpool_rejects_bad_dims():
    with pytest.raises(ShapeError):
        layers.maxpool3_forward(np.zeros((1, 4, 6)))
    with pytest.raises(ShapeError):
        layers.maxpool3_forward(np.zeros((1, 6, 4)))


def test_maxpool_tie_routes_to_first_occurrence():
    x = np.full((1, 3, 3), 2.5)
    y, cache = layers.maxpool3_forward(x)
    npt.assert_allclose(y, [[[2.5]]])
    gx = layers.maxpool3_backward(np.array([[[1.0]]]), cache)
    want = np.zeros((1, 3, 3))
    want[0, 0, 0] = 1.0
    npt.assert_array_equal(gx, want)


def test_maxpool_backward_routes_to_argmax():
    for seed in range(10):
        x = SeededRng(seed).normal((2, 6, 9))
        y, cache = layers.maxpool3_forward(x)
        gy = SeededRng(seed + 100).normal(y.shape)
        gx = layers.maxpool3_backward(gy, cache)
        npt.assert_allclose(gx.sum(), gy.sum(), rtol=1e-12)
        for ci in range(2):
            for oh in range(2):
                for ow in range(3):
                    block = gx[ci, 3 * oh : 3 * oh + 3, 3 * ow : 3 * ow + 3]
                    assert np.count_nonzero(block) <= 1
                    src = x[ci, 3 * oh : 3 * oh + 3, 3 * ow : 3 * ow + 3]
                    pos = np.unravel_index(np.argmax(src), (3, 3))
                    npt.assert_allclose(block[pos], gy[ci, oh, ow])


def test_maxpool_jit_and_numpy_paths_agree():
    x = np.ascontiguousarray(SeededRng(5).normal((3, 4, 9, 12), dtype=np.float32))
    y_a, arg_a = _kernels.maxpool3_forward(x)
    y_n, arg_n = _kernels._maxpool3_forward_np(x)
    npt.assert_array_equal(y_a, y_n)
    npt.assert_array_equal(arg_a, arg_n)
    gy = np.ascontiguousarray(SeededRng(6).normal(y_a.shape, dtype=np.float32))
    npt.assert_array_equal(
        _kernels.maxpool3_backward(gy, arg_a, 9, 12),
        _kernels._maxpool3_backward_np(gy, arg_n, 9, 12),
    )


# ---------------------------------------------------------------------------
# upsample3
# ---------------------------------------------------------------------------


def test_upsample_constant_replication():
    y, _ = layers.upsample3_forward(np.array([[[5.0]]]))
    npt.assert_allclose(y, np.full((1, 3, 3), 5.0))


def test_upsample_decoder_shape_step():
    x = SeededRng(0).uniform((16, 32, 18))
    y, _ = layers.upsample3_forward(x)
    assert y.shape == (16, 96, 54)


def test_upsample_then_pool_is_identity_on_anything():
    x = SeededRng(1).normal((2, 4, 5))
    y, _ = layers.upsample3_forward(x)
    z, _ = layers.maxpool3_forward(y)
    npt.assert_array_equal(z, x)


def test_pool_then_upsample_fixes_constants():
    c = np.full((3, 9, 9), 0.7)
    p, _ = layers.maxpool3_forward(c)
    u, _ = layers.upsample3_forward(p)
    npt.assert_array_equal(u, c)


def test_upsample_backward_sums_blocks():
    x = SeededRng(2).normal((1, 2, 2, 2))
    _, cache = layers.upsample3_forward(x)
    gy = SeededRng(3).normal((1, 2, 6, 6))
    gx = layers.upsample3_backward(gy, cache)
    for ci in range(2):
        for oh in range(2):
            for ow in range(2):
                blk = gy[0, ci, 3 * oh : 3 * oh + 3, 3 * ow : 3 * ow + 3]
                npt.assert_allclose(gx[0, ci, oh, ow], blk.sum(), rtol=1e-12)


# ---------------------------------------------------------------------------
# dense
# ---------------------------------------------------------------------------


def test_dense_identity():
    x = np.array([1.0, -2.0, 3.0])
    y, _ = layers.dense_forward(x, np.eye(3), np.zeros(3))
    npt.assert_allclose(y, x)


def test_dense_tiny_example():
    y, _ = layers.dense_forward(np.array([4.0, 5.0]), np.array([[1.0, 2.0]]), np.array([3.0]))
    npt.assert_allclose(y, [17.0])


def test_dense_matches_dot_product_oracle():
    for seed in range(10):
        rng = SeededRng(seed)
        x = rng.normal(8)
        w = rng.normal((3, 8))
        b = rng.normal(3)
        y, _ = layers.dense_forward(x, w, b)
        want = np.array([np.dot(w[o], x) + b[o] for o in range(3)])
        assert np.max(np.abs(y - want)) < 1e-6


def test_dense_backward_matches_finite_differences():
    rng = SeededRng(7)
    x = rng.normal((4, 6))
    w = rng.normal((3, 6))
    b = rng.normal(3)
    t = rng.normal((4, 3))

    def loss():
        y, _ = layers.dense_forward(x, w, b)
        return float(np.sum((y - t) ** 2))

    y, cache = layers.dense_forward(x, w, b)
    gx, gw, gb = layers.dense_backward(2.0 * (y - t), cache, w)
    for arr, got in ((x, gx), (w, gw), (b, gb)):
        want = fd_gradient(loss, arr)
        npt.assert_allclose(got, want, rtol=1e-6, atol=1e-8)


def test_dense_shape_mismatch_raises():
    with pytest.raises(ShapeError):
        layers.dense_forward(np.zeros(4), np.zeros((2, 5)), np.zeros(2))


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------


def test_relu_values():
    y, _ = layers.relu_forward(np.array([-1.0, 0.0, 2.0]))
    npt.assert_allclose(y, [0.0, 0.0, 2.0])


def test_relu_gradient_zero_at_origin():
    x = np.array([-1.0, 0.0, 2.0])
    _, cache = layers.relu_forward(x)
    g = layers.relu_backward(np.ones(3), cache)
    npt.assert_allclose(g, [0.0, 0.0, 1.0])


def test_sigmoid_at_zero():
    y, _ = layers.sigmoid_forward(np.array([0.0]))
    npt.assert_allclose(y, [0.5])


def test_sigmoid_extreme_inputs_stay_finite():
    y, _ = layers.sigmoid_forward(np.array([-1e4, -50.0, 50.0, 1e4], dtype=np.float32))
    assert np.all(np.isfinite(y))
    assert np.all((y >= 0) & (y <= 1))


def test_sigmoid_gradient_matches_finite_differences():
    x = SeededRng(9).normal(16) * 2.0

    def loss():
        y, _ = layers.sigmoid_forward(x)
        return float(np.sum(y**2))

    y, cache = layers.sigmoid_forward(x)
    got = layers.sigmoid_backward(2.0 * y, cache)
    want = fd_gradient(loss, x)
    denom = np.maximum(np.abs(want), 1e-8)
    assert np.max(np.abs(got - want) / denom) < 1e-7


# ---------------------------------------------------------------------------
# dropout
# ---------------------------------------------------------------------------


def test_dropout_rate_zero_is_identity():
    x = SeededRng(0).normal(100)
    y, _ = layers.dropout_forward(x, 0.0, SeededRng(1), training=True)
    npt.assert_array_equal(y, x)


def test_dropout_inference_is_identity():
    x = SeededRng(0).normal(100)
    y, _ = layers.dropout_forward(x, 0.9, SeededRng(1), training=False)
    npt.assert_array_equal(y, x)


def test_dropout_zeroed_fraction_concentrates():
    x = np.ones(100_000)
    y, _ = layers.dropout_forward(x, 0.5, SeededRng(42), training=True)
    zeroed = np.mean(y == 0)
    assert abs(zeroed - 0.5) < 0.01


def test_dropout_survivors_scaled():
    x = np.ones(10_000)
    y, _ = layers.dropout_forward(x, 0.25, SeededRng(7), training=True)
    survivors = y[y != 0]
    npt.assert_allclose(survivors, 1.0 / 0.75)
    assert abs(y.mean() - 1.0) < 0.05


def test_dropout_backward_uses_same_mask():
    x = SeededRng(3).normal(1000)
    y, cache = layers.dropout_forward(x, 0.5, SeededRng(4), training=True)
    g = layers.dropout_backward(np.ones(1000), cache)
    npt.assert_array_equal(g == 0, y == 0)


def test_dropout_seeded_reproducibility():
    x = SeededRng(0).normal(500)
    y1, _ = layers.dropout_forward(x, 0.5, SeededRng(11), training=True)
    y2, _ = layers.dropout_forward(x, 0.5, SeededRng(11), training=True)
    npt.assert_array_equal(y1, y2)


def test_dropout_invalid_rate_raises():
    with pytest.raises(ConfigError):
        layers.dropout_forward(np.zeros(4), 1.0, SeededRng(0), training=True)
    with pytest.raises(ConfigError):
        layers.dropout_forward(np.zeros(4), -0.1, SeededRng(0), training=True)
