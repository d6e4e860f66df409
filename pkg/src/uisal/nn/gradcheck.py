"""Finite-difference verification of backpropagated gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from uisal.rng import SeededRng


def grad_check(
    loss_and_grads: Callable[[], tuple[float, Sequence[np.ndarray]]],
    params: Sequence[np.ndarray],
    eps: float = 1e-5,
    rel_floor: float = 1e-6,
    sample: int | None = None,
    rng: SeededRng | None = None,
) -> float:
    """Worst relative error between backprop and central differences.

    `loss_and_grads` recomputes the scalar loss and the gradient list at
    the current parameter values (the arrays in `params` are perturbed in
    place and restored). Run this in 64-bit precision with dropout
    disabled. When `sample` is given, only that many coordinates per
    parameter (seeded choice) are probed instead of every coordinate.

    The relative error of a coordinate is |fd - bp| / max(|fd|, |bp|,
    rel_floor); the floor keeps near-zero gradients from amplifying
    round-off into spurious failures.
    """
    for p in params:
        if p.dtype != np.float64:
            raise ValueError("grad_check requires float64 parameters")
    _, grads = loss_and_grads()
    worst = 0.0
    for pi, (p, g) in enumerate(zip(params, grads)):
        flat_p = p.reshape(-1)
        flat_g = np.asarray(g, dtype=np.float64).reshape(-1)
        if sample is not None and flat_p.size > sample:
            if rng is None:
                rng = SeededRng(0)
            idx = rng.choice_no_replace(flat_p.size, sample)
        else:
            idx = np.arange(flat_p.size)
        for j in idx:
            orig = flat_p[j]
            flat_p[j] = orig + eps
            lp, _ = loss_and_grads()
            flat_p[j] = orig - eps
            lm, _ = loss_and_grads()
            flat_p[j] = orig
            fd = (lp - lm) / (2.0 * eps)
            bp = flat_g[j]
            rel = abs(fd - bp) / max(abs(fd), abs(bp), rel_floor)
            worst = max(worst, rel)
    return worst
