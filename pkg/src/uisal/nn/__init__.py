"""Deterministic tensor layers, losses, optimizers, and gradient checks."""

from uisal.nn.gradcheck import grad_check
from uisal.nn.layers import (
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    dropout_backward,
    dropout_forward,
    he_uniform,
    maxpool3_backward,
    maxpool3_forward,
    relu_backward,
    relu_forward,
    sigmoid_backward,
    sigmoid_forward,
    upsample3_backward,
    upsample3_forward,
)
from uisal.nn.losses import bce_entropy_floor, bce_loss, euclidean_loss
from uisal.nn.optim import AdamState, SgdState, adam_step, sgd_step

__all__ = [
    "AdamState",
    "SgdState",
    "adam_step",
    "bce_entropy_floor",
    "bce_loss",
    "conv2d_backward",
    "conv2d_forward",
    "dense_backward",
    "dense_forward",
    "dropout_backward",
    "dropout_forward",
    "euclidean_loss",
    "grad_check",
    "he_uniform",
    "maxpool3_backward",
    "maxpool3_forward",
    "relu_backward",
    "relu_forward",
    "sgd_step",
    "sigmoid_backward",
    "sigmoid_forward",
    "upsample3_backward",
    "upsample3_forward",
]
