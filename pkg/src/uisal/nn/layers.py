"""Layer operations with exact backward passes.

Every operation is a pure function pair: ``*_forward`` returns the output
together with an opaque cache, ``*_backward`` consumes that cache and the
upstream gradient. Spatial operations take channels-first batches
(N, C, H, W); single images (C, H, W) are accepted and returned without
the batch axis. All operations preserve the input dtype, so the same code
runs the 32-bit training path and the 64-bit verification path.
"""

from __future__ import annotations

import numpy as np

from uisal.errors import ConfigError, ShapeError
from uisal.nn import _kernels
from uisal.rng import SeededRng


def _lift(x: np.ndarray, ndim: int) -> tuple[np.ndarray, bool]:
    if x.ndim == ndim - 1:
        return x[None], True
    if x.ndim != ndim:
        raise ShapeError(f"expected a {ndim - 1}D or {ndim}D array, got shape {x.shape}")
    return x, False


def he_uniform(rng: SeededRng, shape: tuple[int, ...], fan_in: int, dtype=np.float32) -> np.ndarray:
    """He-style uniform init on [-sqrt(6/fan_in), sqrt(6/fan_in))."""
    limit = np.sqrt(6.0 / fan_in)
    return ((rng.uniform(shape) * 2.0 - 1.0) * limit).astype(dtype)


# ---------------------------------------------------------------------------
# convolution, 3x3 kernel, stride 1, zero padding 1
# ---------------------------------------------------------------------------


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Same-padded 3x3 convolution; returns (y, cache)."""
    x, squeezed = _lift(x, 4)
    if w.ndim != 4 or w.shape[2:] != (3, 3):
        raise ShapeError(f"conv weights must be (out, in, 3, 3), got {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ShapeError(
            f"input has {x.shape[1]} channels but layer expects {w.shape[1]}"
        )
    n, cin, h, wd = x.shape
    xpad = np.zeros((n, cin, h + 2, wd + 2), dtype=x.dtype)
    xpad[:, :, 1:-1, 1:-1] = x
    y = _kernels.conv3x3_forward(xpad, w, b)
    if squeezed:
        return y[0], (xpad, squeezed)
    return y, (xpad, squeezed)


def conv2d_backward(gy: np.ndarray, cache, w: np.ndarray):
    """Returns (gx, gw, gb) for conv2d_forward."""
    xpad, squeezed = cache
    if squeezed:
        gy = gy[None]
    gy = np.ascontiguousarray(gy)
    gxpad = _kernels.conv3x3_grad_input(gy, w)
    gw, gb = _kernels.conv3x3_grad_weights(xpad, gy)
    gx = np.ascontiguousarray(gxpad[:, :, 1:-1, 1:-1])
    if squeezed:
        gx = gx[0]
    return gx, gw, gb


# ---------------------------------------------------------------------------
# pooling and upsampling, factor 3
# ---------------------------------------------------------------------------


def maxpool3_forward(x: np.ndarray):
    """Disjoint 3x3 max pooling; returns (y, cache)."""
    x, squeezed = _lift(x, 4)
    h, wd = x.shape[2], x.shape[3]
    if h % 3 or wd % 3:
        raise ShapeError(f"maxpool3 needs spatial dims divisible by 3, got {h}x{wd}")
    y, arg = _kernels.maxpool3_forward(np.ascontiguousarray(x))
    if squeezed:
        return y[0], (arg, h, wd, squeezed)
    return y, (arg, h, wd, squeezed)


def maxpool3_backward(gy: np.ndarray, cache):
    arg, h, wd, squeezed = cache
    if squeezed:
        gy = gy[None]
    gx = _kernels.maxpool3_backward(np.ascontiguousarray(gy), arg, h, wd)
    if squeezed:
        return gx[0]
    return gx


def upsample3_forward(x: np.ndarray):
    """Nearest-neighbor 3x upsampling; returns (y, cache)."""
    x, squeezed = _lift(x, 4)
    y = x.repeat(3, axis=2).repeat(3, axis=3)
    if squeezed:
        return y[0], squeezed
    return y, squeezed


def upsample3_backward(gy: np.ndarray, cache):
    squeezed = cache
    if squeezed:
        gy = gy[None]
    n, c, h3, w3 = gy.shape
    gx = gy.reshape(n, c, h3 // 3, 3, w3 // 3, 3).sum(axis=(3, 5))
    if squeezed:
        return gx[0]
    return gx


# ---------------------------------------------------------------------------
# dense
# ---------------------------------------------------------------------------


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Affine map y = x @ w.T + b; returns (y, cache)."""
    x, squeezed = _lift(x, 2)
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"input width {x.shape[1]} does not match layer width {w.shape[1]}")
    y = x @ w.T + b
    if squeezed:
        return y[0], (x, squeezed)
    return y, (x, squeezed)


def dense_backward(gy: np.ndarray, cache, w: np.ndarray):
    """Returns (gx, gw, gb) for dense_forward."""
    x, squeezed = cache
    if squeezed:
        gy = gy[None]
    gx = gy @ w
    gw = gy.T @ x
    gb = gy.sum(axis=0)
    if squeezed:
        gx = gx[0]
    return gx, gw, gb


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------


def relu_forward(x: np.ndarray):
    y = np.maximum(x, 0)
    return y, x > 0


def relu_backward(gy: np.ndarray, cache):
    return np.where(cache, gy, 0)


def sigmoid_forward(x: np.ndarray):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out, out


def sigmoid_backward(gy: np.ndarray, cache):
    y = cache
    return gy * y * (1.0 - y)


# ---------------------------------------------------------------------------
# dropout (inverted)
# ---------------------------------------------------------------------------


def dropout_forward(x: np.ndarray, rate: float, rng: SeededRng | None, training: bool):
    """Inverted dropout: survivors are scaled by 1/(1-rate) at train time."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise ConfigError("dropout in training mode needs an rng")
    keep = rng.uniform(x.shape) >= rate
    scale = np.asarray(1.0 / (1.0 - rate), dtype=x.dtype)
    mask = keep.astype(x.dtype) * scale
    return x * mask, mask


def dropout_backward(gy: np.ndarray, cache):
    if cache is None:
        return gy
    return gy * cache
