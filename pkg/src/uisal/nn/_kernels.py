"""Low-level conv/pool kernels with a JIT fast path and a numpy fallback.

All convolution kernels operate on channels-first batches: inputs are
(N, C, H, W) arrays that were already zero-padded by one pixel on each
spatial edge, weights are (C_out, C_in, 3, 3), stride is 1. The JIT path
(numba) and the numpy path accumulate contributions in the same
(ci, kh, kw) order; set UISAL_NO_NUMBA=1 to force the numpy path.
"""

from __future__ import annotations

import os

import numpy as np

_USE_NUMBA = False
if not os.environ.get("UISAL_NO_NUMBA"):
    try:
        from numba import njit

        _USE_NUMBA = True
    except ImportError:  # pragma: no cover - exercised via UISAL_NO_NUMBA
        _USE_NUMBA = False


# ---------------------------------------------------------------------------
# numpy reference implementations (always defined; the fallback path)
# ---------------------------------------------------------------------------


def _conv3x3_forward_np(xpad: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, cin, hp, wp = xpad.shape
    h, wd = hp - 2, wp - 2
    cout = w.shape[0]
    y = np.empty((n, cout, h, wd), dtype=xpad.dtype)
    y[:] = b.reshape(1, cout, 1, 1)
    for ci in range(cin):
        for kh in range(3):
            for kw in range(3):
                patch = xpad[:, ci, kh : kh + h, kw : kw + wd]
                y += w[:, ci, kh, kw].reshape(1, cout, 1, 1) * patch[:, None, :, :]
    return y


def _conv3x3_grad_input_np(gy: np.ndarray, w: np.ndarray) -> np.ndarray:
    n, cout, h, wd = gy.shape
    cin = w.shape[1]
    gxpad = np.zeros((n, cin, h + 2, wd + 2), dtype=gy.dtype)
    for ci in range(cin):
        for kh in range(3):
            for kw in range(3):
                contrib = w[:, ci, kh, kw].reshape(1, cout, 1, 1) * gy
                gxpad[:, ci, kh : kh + h, kw : kw + wd] += contrib.sum(axis=1)
    return gxpad


def _conv3x3_grad_weights_np(
    xpad: np.ndarray, gy: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    n, cout, h, wd = gy.shape
    cin = xpad.shape[1]
    gw = np.empty((cout, cin, 3, 3), dtype=gy.dtype)
    for kh in range(3):
        for kw in range(3):
            patch = xpad[:, :, kh : kh + h, kw : kw + wd]
            gw[:, :, kh, kw] = np.einsum("nohw,nihw->oi", gy, patch, optimize=True)
    gb = gy.sum(axis=(0, 2, 3))
    return gw, gb


def _maxpool3_forward_np(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, c, h, wd = x.shape
    ho, wo = h // 3, wd // 3
    win = x.reshape(n, c, ho, 3, wo, 3).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, 9)
    arg = win.argmax(axis=-1).astype(np.uint8)
    y = np.take_along_axis(win, arg[..., None].astype(np.int64), axis=-1)[..., 0]
    return np.ascontiguousarray(y), arg


def _maxpool3_backward_np(gy: np.ndarray, arg: np.ndarray, h: int, wd: int) -> np.ndarray:
    n, c, ho, wo = gy.shape
    gwin = np.zeros((n, c, ho, wo, 9), dtype=gy.dtype)
    np.put_along_axis(gwin, arg[..., None].astype(np.int64), gy[..., None], axis=-1)
    gx = gwin.reshape(n, c, ho, wo, 3, 3).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, wd)
    return np.ascontiguousarray(gx)


# ---------------------------------------------------------------------------
# numba fast path
# ---------------------------------------------------------------------------

if _USE_NUMBA:

    @njit(cache=True)
    def _conv3x3_forward_nb(xpad, w, b, y):  # pragma: no cover - jitted
        n, cin, hp, wp = xpad.shape
        cout = w.shape[0]
        h = hp - 2
        wd = wp - 2
        for ni in range(n):
            for co in range(cout):
                for hi in range(h):
                    yrow = y[ni, co, hi]
                    for xi in range(wd):
                        yrow[xi] = b[co]
                    for ci in range(cin):
                        for kh in range(3):
                            xrow = xpad[ni, ci, hi + kh]
                            for kw in range(3):
                                wv = w[co, ci, kh, kw]
                                for xi in range(wd):
                                    yrow[xi] += wv * xrow[xi + kw]

    @njit(cache=True)
    def _conv3x3_grad_input_nb(gy, w, gxpad):  # pragma: no cover - jitted
        n, cout, h, wd = gy.shape
        cin = w.shape[1]
        for ni in range(n):
            for co in range(cout):
                for hi in range(h):
                    grow = gy[ni, co, hi]
                    for ci in range(cin):
                        for kh in range(3):
                            xrow = gxpad[ni, ci, hi + kh]
                            for kw in range(3):
                                wv = w[co, ci, kh, kw]
                                for xi in range(wd):
                                    xrow[xi + kw] += wv * grow[xi]

    @njit(cache=True, fastmath={"reassoc", "contract"})
    def _conv3x3_grad_weights_nb(xpad, gy, gw, gb):  # pragma: no cover - jitted
        n, cout, h, wd = gy.shape
        cin = xpad.shape[1]
        for co in range(cout):
            for ci in range(cin):
                for kh in range(3):
                    for kw in range(3):
                        gw[co, ci, kh, kw] = 0.0
                for ni in range(n):
                    for hi in range(h):
                        grow = gy[ni, co, hi]
                        for kh in range(3):
                            xrow = xpad[ni, ci, hi + kh]
                            for kw in range(3):
                                acc = 0.0
                                for xi in range(wd):
                                    acc += grow[xi] * xrow[xi + kw]
                                gw[co, ci, kh, kw] += acc
        for co in range(cout):
            acc = 0.0
            for ni in range(n):
                for hi in range(h):
                    grow = gy[ni, co, hi]
                    for xi in range(wd):
                        acc += grow[xi]
            gb[co] = acc

    @njit(cache=True)
    def _maxpool3_forward_nb(x, y, arg):  # pragma: no cover - jitted
        n, c, h, wd = x.shape
        ho = h // 3
        wo = wd // 3
        for ni in range(n):
            for ci in range(c):
                for ho_i in range(ho):
                    for wo_i in range(wo):
                        best = x[ni, ci, 3 * ho_i, 3 * wo_i]
                        besta = 0
                        for kh in range(3):
                            xrow = x[ni, ci, 3 * ho_i + kh]
                            for kw in range(3):
                                v = xrow[3 * wo_i + kw]
                                if v > best:
                                    best = v
                                    besta = 3 * kh + kw
                        y[ni, ci, ho_i, wo_i] = best
                        arg[ni, ci, ho_i, wo_i] = besta

    @njit(cache=True)
    def _maxpool3_backward_nb(gy, arg, gx):  # pragma: no cover - jitted
        n, c, ho, wo = gy.shape
        for ni in range(n):
            for ci in range(c):
                for ho_i in range(ho):
                    for wo_i in range(wo):
                        a = arg[ni, ci, ho_i, wo_i]
                        gx[ni, ci, 3 * ho_i + a // 3, 3 * wo_i + a % 3] = gy[
                            ni, ci, ho_i, wo_i
                        ]


# ---------------------------------------------------------------------------
# dispatchers
# ---------------------------------------------------------------------------


def conv3x3_forward(xpad: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """3x3 stride-1 convolution of a pre-padded batch."""
    if _USE_NUMBA:
        n, cin, hp, wp = xpad.shape
        y = np.empty((n, w.shape[0], hp - 2, wp - 2), dtype=xpad.dtype)
        _conv3x3_forward_nb(xpad, w, b, y)
        return y
    return _conv3x3_forward_np(xpad, w, b)


def conv3x3_grad_input(gy: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. the padded input; caller strips the pad ring."""
    if _USE_NUMBA:
        n, _, h, wd = gy.shape
        gxpad = np.zeros((n, w.shape[1], h + 2, wd + 2), dtype=gy.dtype)
        _conv3x3_grad_input_nb(gy, w, gxpad)
        return gxpad
    return _conv3x3_grad_input_np(gy, w)


def conv3x3_grad_weights(xpad: np.ndarray, gy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients w.r.t. weights and bias."""
    if _USE_NUMBA:
        cout, cin = gy.shape[1], xpad.shape[1]
        gw = np.empty((cout, cin, 3, 3), dtype=gy.dtype)
        gb = np.empty(cout, dtype=gy.dtype)
        _conv3x3_grad_weights_nb(xpad, gy, gw, gb)
        return gw, gb
    return _conv3x3_grad_weights_np(xpad, gy)


def maxpool3_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint 3x3 window max; also returns the in-window argmax (0..8).

    Ties resolve to the first occurrence in row-major window order.
    """
    if _USE_NUMBA:
        n, c, h, wd = x.shape
        y = np.empty((n, c, h // 3, wd // 3), dtype=x.dtype)
        arg = np.empty((n, c, h // 3, wd // 3), dtype=np.uint8)
        _maxpool3_forward_nb(x, y, arg)
        return y, arg
    return _maxpool3_forward_np(x)


def maxpool3_backward(gy: np.ndarray, arg: np.ndarray, h: int, wd: int) -> np.ndarray:
    """Routes each output gradient to its argmax input position."""
    if _USE_NUMBA:
        n, c = gy.shape[:2]
        gx = np.zeros((n, c, h, wd), dtype=gy.dtype)
        _maxpool3_backward_nb(gy, arg, gx)
        return gx
    return _maxpool3_backward_np(gy, arg, h, wd)


def using_numba() -> bool:
    """Whether the JIT fast path is active in this process."""
    return _USE_NUMBA
