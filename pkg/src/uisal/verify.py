"""Seeded finite-difference battery over every layer and loss.

Each component is checked in float64 with central differences at eps
1e-5; the battery draws fresh inputs per seed and reports the worst
relative error seen anywhere. Inputs are redrawn (or constructed) so no
ReLU pre-activation or pooling near-tie sits inside the perturbation
radius, which would turn a kink crossing into a spurious failure.
"""

from __future__ import annotations

import numpy as np

from uisal.errors import NumericError
from uisal.model import (
    Autoencoder,
    SaliencyHead,
    ae_backward,
    ae_forward,
    head_backward,
    head_forward,
)
from uisal.nn import layers
from uisal.nn.gradcheck import grad_check
from uisal.nn.losses import bce_loss, euclidean_loss
from uisal.rng import SeededRng

TOLERANCE = 1e-4
EPS = 1e-5


def _check_conv(rng: SeededRng) -> float:
    x = rng.normal((2, 3, 6, 5))
    w = rng.normal((4, 3, 3, 3)) * 0.5
    b = rng.normal((4,)) * 0.1
    target = rng.normal((2, 4, 6, 5))

    def loss_and_grads():
        y, cache = layers.conv2d_forward(x, w, b)
        loss, g = euclidean_loss(y, target)
        gx, gw, gb = layers.conv2d_backward(g, cache, w)
        return loss, [gx, gw, gb]

    return grad_check(loss_and_grads, [x, w, b], eps=EPS)


def _check_pool(rng: SeededRng) -> float:
    # A scaled permutation keeps every pool window free of near-ties, so
    # the argmax cannot flip inside the finite-difference step.
    n = 2 * 3 * 6 * 9
    x = (rng.permutation(n).astype(np.float64) / n).reshape(2, 3, 6, 9)
    target = rng.normal((2, 3, 2, 3))

    def loss_and_grads():
        y, cache = layers.maxpool3_forward(x)
        loss, g = euclidean_loss(y, target)
        return loss, [layers.maxpool3_backward(g, cache)]

    return grad_check(loss_and_grads, [x], eps=EPS)


def _check_upsample(rng: SeededRng) -> float:
    x = rng.normal((2, 4, 3, 5))
    target = rng.normal((2, 4, 9, 15))

    def loss_and_grads():
        y, cache = layers.upsample3_forward(x)
        loss, g = euclidean_loss(y, target)
        return loss, [layers.upsample3_backward(g, cache)]

    return grad_check(loss_and_grads, [x], eps=EPS)


def _check_dense(rng: SeededRng) -> float:
    x = rng.normal((3, 7))
    w = rng.normal((4, 7)) * 0.5
    b = rng.normal((4,)) * 0.1
    target = rng.normal((3, 4))

    def loss_and_grads():
        y, cache = layers.dense_forward(x, w, b)
        loss, g = euclidean_loss(y, target)
        gx, gw, gb = layers.dense_backward(g, cache, w)
        return loss, [gx, gw, gb]

    return grad_check(loss_and_grads, [x, w, b], eps=EPS)


def _draw_away_from_kinks(draw, preacts_of, min_gap=1e-3, tries=60):
    """Redraws a case until every ReLU pre-activation clears the kink."""
    for attempt in range(tries):
        case = draw(attempt)
        if min(np.min(np.abs(p)) for p in preacts_of(case)) > min_gap:
            return case
    raise NumericError("could not draw a kink-free gradient-check case")


def _check_relu(rng: SeededRng) -> float:
    def draw(attempt):
        sub = rng.derive(f"try{attempt}")
        return sub.normal((3, 6)), sub.normal((4, 6)) * 0.7, sub.normal((4,)) * 0.2, sub.normal((3, 4))

    def preacts_of(case):
        x, w, b, _ = case
        return [x @ w.T + b]

    x, w, b, target = _draw_away_from_kinks(draw, preacts_of)

    def loss_and_grads():
        z, dcache = layers.dense_forward(x, w, b)
        y, rcache = layers.relu_forward(z)
        loss, g = euclidean_loss(y, target)
        g = layers.relu_backward(g, rcache)
        gx, gw, gb = layers.dense_backward(g, dcache, w)
        return loss, [gx, gw, gb]

    return grad_check(loss_and_grads, [x, w, b], eps=EPS)


def _check_sigmoid_bce(rng: SeededRng) -> float:
    x = rng.normal((5, 4)) * 0.5
    w = rng.normal((1, 4)) * 0.5
    b = rng.normal((1,)) * 0.1
    t = rng.uniform((5,)) * 0.8 + 0.1

    def loss_and_grads():
        z, dcache = layers.dense_forward(x, w, b)
        p, scache = layers.sigmoid_forward(z)
        loss, gp = bce_loss(p[:, 0], t)
        g = layers.sigmoid_backward(gp[:, None], scache)
        gx, gw, gb = layers.dense_backward(g, dcache, w)
        return loss, [gx, gw, gb]

    return grad_check(loss_and_grads, [x, w, b], eps=EPS)


def _check_euclidean(rng: SeededRng) -> float:
    pred = rng.normal((7,))
    target = pred - (rng.uniform((7,)) + 0.5)

    def loss_and_grads():
        loss, g = euclidean_loss(pred, target)
        return loss, [g]

    return grad_check(loss_and_grads, [pred], eps=EPS)


def _check_bce(rng: SeededRng) -> float:
    pred = rng.uniform((9,)) * 0.6 + 0.2
    t = rng.uniform((9,)) * 0.8 + 0.1

    def loss_and_grads():
        loss, g = bce_loss(pred, t)
        return loss, [g]

    return grad_check(loss_and_grads, [pred], eps=EPS)


def _check_autoencoder(rng: SeededRng) -> float:
    def draw(attempt):
        sub = rng.derive(f"try{attempt}")
        ae = Autoencoder.init(sub.derive("init"), dtype=np.float64)
        x = sub.uniform((1, 3, 9, 9))
        target = sub.uniform((1, 3, 9, 9))
        return ae, x, target

    def preacts_of(case):
        ae, x, _ = case
        pre = []
        a, _ = layers.conv2d_forward(x, ae.w1, ae.b1)
        pre.append(a)
        a, _ = layers.relu_forward(a)
        a, _ = layers.maxpool3_forward(a)
        a, _ = layers.conv2d_forward(a, ae.w2, ae.b2)
        pre.append(a)
        a, _ = layers.relu_forward(a)
        a, _ = layers.maxpool3_forward(a)
        a, _ = layers.conv2d_forward(a, ae.w3, ae.b3)
        pre.append(a)
        a, _ = layers.relu_forward(a)
        a, _ = layers.upsample3_forward(a)
        a, _ = layers.conv2d_forward(a, ae.w4, ae.b4)
        pre.append(a)
        a, _ = layers.relu_forward(a)
        a, _ = layers.upsample3_forward(a)
        return pre

    ae, x, target = _draw_away_from_kinks(draw, preacts_of)

    def loss_and_grads():
        recon, caches = ae_forward(ae, x)
        loss, grad = euclidean_loss(recon, target)
        return loss, ae_backward(grad, caches)

    return grad_check(
        loss_and_grads, ae.params(), eps=EPS, sample=12, rng=rng.derive("probe")
    )


def _check_head(rng: SeededRng) -> float:
    def draw(attempt):
        sub = rng.derive(f"try{attempt}")
        head = SaliencyHead.init(sub.derive("init"), in_dim=13, widths=(8, 5), dtype=np.float64)
        x = sub.normal((4, 13)) * 0.5
        t = sub.uniform((4,)) * 0.8 + 0.1
        return head, x, t

    def preacts_of(case):
        head, x, _ = case
        z1 = x @ head.w1.T + head.b1
        z2 = np.maximum(z1, 0.0) @ head.w2.T + head.b2
        return [z1, z2]

    head, x, t = _draw_away_from_kinks(draw, preacts_of)

    def loss_and_grads():
        pred, caches = head_forward(head, x)
        loss, gp = bce_loss(pred, t)
        grads, _ = head_backward(gp, caches)
        return loss, grads

    return grad_check(loss_and_grads, head.params(), eps=EPS)


_COMPONENTS = {
    "conv": _check_conv,
    "maxpool": _check_pool,
    "upsample": _check_upsample,
    "dense": _check_dense,
    "relu": _check_relu,
    "sigmoid_bce": _check_sigmoid_bce,
    "euclidean_loss": _check_euclidean,
    "bce_loss": _check_bce,
    "autoencoder": _check_autoencoder,
    "head": _check_head,
}


def run_gradient_battery(n_seeds: int = 20, base_seed: int = 0) -> dict:
    """Runs every component check over n_seeds seeds.

    Returns {"worst": float, "tolerance": float, "n_seeds": int,
    "components": {name: worst rel err}} without judging the outcome;
    callers compare against `tolerance`.
    """
    results = {name: 0.0 for name in _COMPONENTS}
    root = SeededRng(base_seed).derive("gradient-battery")
    for seed in range(n_seeds):
        for name, check in _COMPONENTS.items():
            rel = check(root.derive(f"{name}:{seed}"))
            results[name] = max(results[name], rel)
    return {
        "worst": max(results.values()),
        "tolerance": TOLERANCE,
        "n_seeds": n_seeds,
        "components": results,
    }


__all__ = ["EPS", "TOLERANCE", "run_gradient_battery"]
