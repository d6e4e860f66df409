"""Optimizers: Adam with coupled L2 decay, and plain SGD."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from uisal.errors import ShapeError


@dataclass
class AdamState:
    """Per-parameter moment estimates plus hyperparameters.

    L2 regularization is coupled: grad <- grad + l2 * param before the
    moment updates, for every parameter whose decay flag is set.
    """

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    l2: float = 1e-4
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def ensure(self, params: list[np.ndarray]) -> None:
        if not self.m:
            self.m = [np.zeros_like(p, dtype=np.float64) for p in params]
            self.v = [np.zeros_like(p, dtype=np.float64) for p in params]
        if len(self.m) != len(params):
            raise ShapeError(
                f"optimizer tracks {len(self.m)} parameters, got {len(params)}"
            )


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    decay: list[bool] | None = None,
) -> None:
    """One in-place Adam update.

    `decay` marks which parameters receive L2 (weights yes, biases no by
    convention of the callers); None applies decay to every parameter.
    """
    state.ensure(params)
    if len(grads) != len(params):
        raise ShapeError(f"{len(params)} parameters but {len(grads)} gradients")
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeError(f"parameter {i}: shape {p.shape} vs gradient {g.shape}")
        g64 = g.astype(np.float64)
        if state.l2 and (decay is None or decay[i]):
            g64 += state.l2 * p.astype(np.float64)
        state.m[i] *= state.beta1
        state.m[i] += (1.0 - state.beta1) * g64
        state.v[i] *= state.beta2
        state.v[i] += (1.0 - state.beta2) * g64 * g64
        mhat = state.m[i] / bc1
        vhat = state.v[i] / bc2
        p -= (state.lr * mhat / (np.sqrt(vhat) + state.eps)).astype(p.dtype)


@dataclass
class SgdState:
    """Plain stochastic gradient descent with the same coupled L2."""

    lr: float = 1e-3
    l2: float = 1e-4
    t: int = 0


def sgd_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: SgdState,
    decay: list[bool] | None = None,
) -> None:
    """One in-place SGD update."""
    if len(grads) != len(params):
        raise ShapeError(f"{len(params)} parameters but {len(grads)} gradients")
    state.t += 1
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeError(f"parameter {i}: shape {p.shape} vs gradient {g.shape}")
        step = g
        if state.l2 and (decay is None or decay[i]):
            step = g + state.l2 * p
        p -= (state.lr * step).astype(p.dtype)
