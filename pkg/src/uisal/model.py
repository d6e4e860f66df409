"""The three-scale denoising autoencoders and the element-saliency predictor.

Each scale crop runs through its own autoencoder. The encoder stack is
conv(3->3) + pool, conv(3->16) + pool, turning a 162x288x3 crop into a
16x18x32 code (9216 values, flattened channel-major). The decoder mirrors
it with conv(16->16) + 3x upsample, conv(16->32) + 3x upsample, and a
final linear conv(32->3). Autoencoders are pretrained to reconstruct
clean crops from pixel-corrupted inputs under the summed squared error.

The saliency head concatenates the three frozen codes with the z-scored
low-level features (27665 values) and maps them through
dense(512)+ReLU+dropout, dense(128)+ReLU+dropout, dense(1)+sigmoid.
Training minimizes mean binary cross entropy against the soft per-element
ground truth; per-screen predictions are normalized to sum to 1.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from uisal.errors import ConfigError, DataError, NotFittedError, ShapeError
from uisal.features import (
    CROP_H,
    CROP_W,
    N_LOW_LEVEL,
    UiElement,
    UiScreen,
    corrupt_pixels,
    extract_scales,
    low_level_features,
)
from uisal.nn import layers
from uisal.nn.losses import bce_loss, euclidean_loss
from uisal.nn.optim import AdamState, SgdState, adam_step, sgd_step
from uisal.rng import SeededRng

CODE_LEN = 16 * 18 * 32  # 9216
N_SCALES = 3
FEATURE_LEN = N_SCALES * CODE_LEN + N_LOW_LEVEL  # 27665


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    """Hyperparameters for autoencoder pretraining and head training.

    `epochs` drives the head; `ae_epochs` (default: same value) drives
    autoencoder pretraining, and `ae_max_crops` caps how many element
    crops per scale feed it. `head_widths` sizes the two hidden layers.
    """

    batch: int = 30
    epochs: int = 20
    ae_epochs: int | None = None
    optimizer: str = "adam"
    # Head learning rate. The raw encoder codes are high-dimensional and
    # unnormalized, so per-coordinate optimizers need a small step here;
    # larger rates saturate the sigmoid on the first batch.
    lr: float = 1e-5
    ae_lr: float = 1e-3
    l2: float = 1e-4
    dropout: float = 0.5
    corruption_f: float = 0.25
    loss: str = "bce"
    seed: int = 0
    validation_fraction: float = 0.1
    early_stop_patience: int = 0
    ae_max_crops: int | None = None
    head_widths: tuple[int, int] = (512, 128)
    finetune_encoders: bool = False
    hook: str | None = None

    def __post_init__(self):
        if self.batch < 1:
            raise ConfigError(f"batch must be >= 1, got {self.batch}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.ae_epochs is not None and self.ae_epochs < 1:
            raise ConfigError(f"ae_epochs must be >= 1, got {self.ae_epochs}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be adam or sgd, got {self.optimizer!r}")
        if self.loss not in ("bce", "mse"):
            raise ConfigError(f"loss must be bce or mse, got {self.loss!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if not 0.0 <= self.corruption_f <= 1.0:
            raise ConfigError(f"corruption_f must be in [0, 1], got {self.corruption_f}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError(
                f"validation_fraction must be in [0, 1), got {self.validation_fraction}"
            )
        if len(self.head_widths) != 2 or any(w < 1 for w in self.head_widths):
            raise ConfigError(f"head_widths must be two positive ints, got {self.head_widths}")

    @property
    def effective_ae_epochs(self) -> int:
        return self.epochs if self.ae_epochs is None else self.ae_epochs

    def to_dict(self) -> dict:
        return {
            "batch": self.batch,
            "epochs": self.epochs,
            "ae_epochs": self.ae_epochs,
            "optimizer": self.optimizer,
            "lr": self.lr,
            "ae_lr": self.ae_lr,
            "l2": self.l2,
            "dropout": self.dropout,
            "corruption_f": self.corruption_f,
            "loss": self.loss,
            "seed": self.seed,
            "validation_fraction": self.validation_fraction,
            "early_stop_patience": self.early_stop_patience,
            "ae_max_crops": self.ae_max_crops,
            "head_widths": list(self.head_widths),
            "finetune_encoders": self.finetune_encoders,
            "hook": self.hook,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        kwargs = dict(d)
        if "head_widths" in kwargs:
            kwargs["head_widths"] = tuple(kwargs["head_widths"])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(kwargs) - known)
        if unknown:
            raise ConfigError(f"unknown train config keys: {', '.join(unknown)}")
        return cls(**kwargs)


@dataclass
class TrainHistory:
    """Per-epoch losses and the index the returned weights came from."""

    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0

    def log_lines(self) -> list[str]:
        return [
            f"{i}\t{t:.8e}\t{v:.8e}"
            for i, (t, v) in enumerate(zip(self.train_loss, self.val_loss))
        ]


# ---------------------------------------------------------------------------
# external feature hooks
# ---------------------------------------------------------------------------

_FEATURE_HOOKS: dict[str, tuple[int, Callable[[UiScreen, UiElement], np.ndarray]]] = {}


def register_feature_hook(
    name: str, length: int, fn: Callable[[UiScreen, UiElement], np.ndarray]
) -> None:
    """Registers an extra per-element feature provider of fixed length."""
    if length < 1:
        raise ConfigError(f"hook block length must be >= 1, got {length}")
    _FEATURE_HOOKS[name] = (int(length), fn)


def unregister_feature_hook(name: str) -> None:
    _FEATURE_HOOKS.pop(name, None)


def get_feature_hook(name: str) -> tuple[int, Callable[[UiScreen, UiElement], np.ndarray]]:
    if name not in _FEATURE_HOOKS:
        raise ConfigError(f"unknown feature provider {name!r}")
    return _FEATURE_HOOKS[name]


# ---------------------------------------------------------------------------
# autoencoder
# ---------------------------------------------------------------------------


@dataclass
class Autoencoder:
    """Parameters of one denoising autoencoder (see module docstring)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    w4: np.ndarray
    b4: np.ndarray
    w5: np.ndarray
    b5: np.ndarray

    @classmethod
    def init(cls, rng: SeededRng, dtype=np.float32) -> "Autoencoder":
        def conv(cout, cin):
            return (
                layers.he_uniform(rng, (cout, cin, 3, 3), fan_in=cin * 9, dtype=dtype),
                np.zeros(cout, dtype=dtype),
            )

        w1, b1 = conv(3, 3)
        w2, b2 = conv(16, 3)
        w3, b3 = conv(16, 16)
        w4, b4 = conv(32, 16)
        w5, b5 = conv(3, 32)
        return cls(w1, b1, w2, b2, w3, b3, w4, b4, w5, b5)

    def params(self) -> list[np.ndarray]:
        return [
            self.w1, self.b1, self.w2, self.b2, self.w3,
            self.b3, self.w4, self.b4, self.w5, self.b5,
        ]

    def decay_flags(self) -> list[bool]:
        return [True, False] * 5

    def copy(self) -> "Autoencoder":
        return Autoencoder(*[p.copy() for p in self.params()])

    def astype(self, dtype) -> "Autoencoder":
        return Autoencoder(*[p.astype(dtype) for p in self.params()])


def crops_to_batch(crops: Sequence[np.ndarray], dtype=np.float32) -> np.ndarray:
    """Stacks HxWx3 crops into a channels-first (N, 3, H, W) batch."""
    batch = np.stack([np.asarray(c) for c in crops])
    if batch.ndim != 4 or batch.shape[1:] != (CROP_H, CROP_W, 3):
        raise ShapeError(
            f"crops must be {CROP_H}x{CROP_W}x3, got batch shape {batch.shape}"
        )
    return np.ascontiguousarray(batch.transpose(0, 3, 1, 2).astype(dtype, copy=False))


def encoder_forward(ae: Autoencoder, x: np.ndarray) -> np.ndarray:
    """Encoder-only pass: (N, 3, H, W) -> (N, 16, H/9, W/9)."""
    a, _ = layers.conv2d_forward(x, ae.w1, ae.b1)
    a, _ = layers.relu_forward(a)
    a, _ = layers.maxpool3_forward(a)
    a, _ = layers.conv2d_forward(a, ae.w2, ae.b2)
    a, _ = layers.relu_forward(a)
    a, _ = layers.maxpool3_forward(a)
    return a


def encode(ae: Autoencoder, crop: np.ndarray) -> np.ndarray:
    """Flattened (channel-major) encoder code of one 162x288x3 crop."""
    x = crops_to_batch([crop], dtype=np.asarray(crop).dtype)
    return encoder_forward(ae, x).reshape(-1)


def encode_batch(ae: Autoencoder, x: np.ndarray) -> np.ndarray:
    """Encoder codes for a channels-first batch, flattened to (N, 9216)."""
    code = encoder_forward(ae, x)
    return code.reshape(code.shape[0], -1)


def encoder_forward_caches(ae: Autoencoder, x: np.ndarray):
    """Encoder pass that keeps layer caches so gradients can flow back."""
    caches = []
    a, c = layers.conv2d_forward(x, ae.w1, ae.b1)
    caches.append(("conv", c, ae.w1))
    a, c = layers.relu_forward(a)
    caches.append(("relu", c, None))
    a, c = layers.maxpool3_forward(a)
    caches.append(("pool", c, None))
    a, c = layers.conv2d_forward(a, ae.w2, ae.b2)
    caches.append(("conv", c, ae.w2))
    a, c = layers.relu_forward(a)
    caches.append(("relu", c, None))
    a, c = layers.maxpool3_forward(a)
    caches.append(("pool", c, None))
    return a, caches


def encoder_backward(grad_code: np.ndarray, caches) -> list[np.ndarray]:
    """Backward through the encoder; returns [gw1, gb1, gw2, gb2]."""
    conv_grads = []
    g = grad_code
    for kind, cache, w in reversed(caches):
        if kind == "conv":
            g, gw, gb = layers.conv2d_backward(g, cache, w)
            conv_grads.append((gw, gb))
        elif kind == "relu":
            g = layers.relu_backward(g, cache)
        elif kind == "pool":
            g = layers.maxpool3_backward(g, cache)
    conv_grads.reverse()
    grads: list[np.ndarray] = []
    for gw, gb in conv_grads:
        grads.extend([gw, gb])
    return grads


def ae_forward(ae: Autoencoder, x: np.ndarray):
    """Full forward pass; returns (reconstruction, caches for backward)."""
    caches = []
    a, c = layers.conv2d_forward(x, ae.w1, ae.b1)
    caches.append(("conv", c, ae.w1))
    a, c = layers.relu_forward(a)
    caches.append(("relu", c, None))
    a, c = layers.maxpool3_forward(a)
    caches.append(("pool", c, None))
    a, c = layers.conv2d_forward(a, ae.w2, ae.b2)
    caches.append(("conv", c, ae.w2))
    a, c = layers.relu_forward(a)
    caches.append(("relu", c, None))
    a, c = layers.maxpool3_forward(a)
    caches.append(("pool", c, None))
    a, c = layers.conv2d_forward(a, ae.w3, ae.b3)
    caches.append(("conv", c, ae.w3))
    a, c = layers.relu_forward(a)
    caches.append(("relu", c, None))
    a, c = layers.upsample3_forward(a)
    caches.append(("up", c, None))
    a, c = layers.conv2d_forward(a, ae.w4, ae.b4)
    caches.append(("conv", c, ae.w4))
    a, c = layers.relu_forward(a)
    caches.append(("relu", c, None))
    a, c = layers.upsample3_forward(a)
    caches.append(("up", c, None))
    a, c = layers.conv2d_forward(a, ae.w5, ae.b5)
    caches.append(("conv", c, ae.w5))
    return a, caches


def ae_backward(grad_out: np.ndarray, caches) -> list[np.ndarray]:
    """Backward through the full autoencoder; returns grads in param order."""
    conv_grads = []
    g = grad_out
    for kind, cache, w in reversed(caches):
        if kind == "conv":
            g, gw, gb = layers.conv2d_backward(g, cache, w)
            conv_grads.append((gw, gb))
        elif kind == "relu":
            g = layers.relu_backward(g, cache)
        elif kind == "pool":
            g = layers.maxpool3_backward(g, cache)
        elif kind == "up":
            g = layers.upsample3_backward(g, cache)
    conv_grads.reverse()
    grads: list[np.ndarray] = []
    for gw, gb in conv_grads:
        grads.extend([gw, gb])
    return grads


def _make_optimizer(cfg: TrainConfig, lr: float | None = None):
    lr = cfg.lr if lr is None else lr
    if cfg.optimizer == "adam":
        state = AdamState(lr=lr, l2=cfg.l2)
        return state, adam_step
    state = SgdState(lr=lr, l2=cfg.l2)
    return state, sgd_step


def _val_split(n: int, fraction: float, rng: SeededRng) -> tuple[np.ndarray, np.ndarray]:
    """Seeded held-out split; validation is empty when n is too small."""
    if n < 2 or fraction <= 0.0:
        return np.arange(n), np.arange(0)
    n_val = min(n - 1, max(1, int(round(fraction * n))))
    perm = rng.permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def pretrain_autoencoder(
    crops: Sequence[np.ndarray], cfg: TrainConfig, stream: str = "scale0"
) -> tuple[Autoencoder, TrainHistory]:
    """Trains one denoising autoencoder on the given crops.

    The training objective is the summed squared reconstruction error of
    clean crops from corrupted inputs. Validation loss is the clean-input
    reconstruction error on a held-out crop split (or the training split
    when too few crops); the returned weights are the best-validation
    snapshot. Fully deterministic given cfg.seed and the stream label.
    """
    if len(crops) == 0:
        raise DataError("autoencoder pretraining needs at least one crop")
    root = SeededRng(cfg.seed).derive(f"ae:{stream}")
    x_all = crops_to_batch(crops)
    n = x_all.shape[0]
    train_idx, val_idx = _val_split(n, cfg.validation_fraction, root.derive("split"))
    x_train = x_all[train_idx]
    x_val = x_all[val_idx] if val_idx.size else x_train

    ae = Autoencoder.init(root.derive("init"))
    params = ae.params()
    decay = ae.decay_flags()
    state, step = _make_optimizer(cfg, lr=cfg.ae_lr)
    shuffle_rng = root.derive("shuffle")
    corrupt_rng = root.derive("corrupt")

    history = TrainHistory()
    best_val = np.inf
    best_params = [p.copy() for p in params]
    since_best = 0
    for epoch in range(cfg.effective_ae_epochs):
        perm = shuffle_rng.permutation(x_train.shape[0])
        total = 0.0
        for start in range(0, perm.size, cfg.batch):
            idx = perm[start : start + cfg.batch]
            clean = x_train[idx]
            noisy = np.empty_like(clean)
            for j in range(clean.shape[0]):
                hwc = np.ascontiguousarray(clean[j].transpose(1, 2, 0))
                noisy[j] = corrupt_pixels(hwc, cfg.corruption_f, corrupt_rng).transpose(2, 0, 1)
            recon, caches = ae_forward(ae, noisy)
            loss, grad = euclidean_loss(recon, clean)
            grads = ae_backward(grad, caches)
            step(params, grads, state, decay=decay)
            total += loss
        history.train_loss.append(total / x_train.shape[0])

        recon_val, _ = ae_forward(ae, x_val)
        vloss, _ = euclidean_loss(recon_val, x_val)
        vloss /= x_val.shape[0]
        history.val_loss.append(vloss)
        if vloss < best_val:
            best_val = vloss
            best_params = [p.copy() for p in params]
            history.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if cfg.early_stop_patience and since_best >= cfg.early_stop_patience:
                break
    for p, best in zip(params, best_params):
        p[...] = best
    return ae, history


# ---------------------------------------------------------------------------
# saliency head and model
# ---------------------------------------------------------------------------


@dataclass
class SaliencyHead:
    """The three fully connected layers that map features to a probability."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    @classmethod
    def init(
        cls, rng: SeededRng, in_dim: int, widths: tuple[int, int], dtype=np.float32
    ) -> "SaliencyHead":
        h1, h2 = widths
        return cls(
            layers.he_uniform(rng, (h1, in_dim), fan_in=in_dim, dtype=dtype),
            np.zeros(h1, dtype=dtype),
            layers.he_uniform(rng, (h2, h1), fan_in=h1, dtype=dtype),
            np.zeros(h2, dtype=dtype),
            layers.he_uniform(rng, (1, h2), fan_in=h2, dtype=dtype),
            np.zeros(1, dtype=dtype),
        )

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3]

    def decay_flags(self) -> list[bool]:
        return [True, False] * 3

    def copy(self) -> "SaliencyHead":
        return SaliencyHead(*[p.copy() for p in self.params()])

    @property
    def in_dim(self) -> int:
        return self.w1.shape[1]


def head_forward(
    head: SaliencyHead,
    x: np.ndarray,
    dropout_rate: float = 0.0,
    rng: SeededRng | None = None,
    training: bool = False,
):
    """Head pass over a (B, D) feature batch; returns (probs (B,), caches)."""
    caches = []
    a, c = layers.dense_forward(x, head.w1, head.b1)
    caches.append(("dense", c, head.w1))
    a, c = layers.relu_forward(a)
    caches.append(("relu", c, None))
    a, c = layers.dropout_forward(a, dropout_rate, rng, training)
    caches.append(("dropout", c, None))
    a, c = layers.dense_forward(a, head.w2, head.b2)
    caches.append(("dense", c, head.w2))
    a, c = layers.relu_forward(a)
    caches.append(("relu", c, None))
    a, c = layers.dropout_forward(a, dropout_rate, rng, training)
    caches.append(("dropout", c, None))
    a, c = layers.dense_forward(a, head.w3, head.b3)
    caches.append(("dense", c, head.w3))
    a, c = layers.sigmoid_forward(a)
    caches.append(("sigmoid", c, None))
    return a[:, 0], caches


def head_backward(grad_prob: np.ndarray, caches) -> tuple[list[np.ndarray], np.ndarray]:
    """Backward through the head.

    Returns (grads aligned with head.params(), gradient w.r.t. the input
    feature batch); the latter feeds encoder fine-tuning.
    """
    dense_grads = []
    g = grad_prob[:, None]
    for kind, cache, w in reversed(caches):
        if kind == "sigmoid":
            g = layers.sigmoid_backward(g, cache)
        elif kind == "dense":
            g, gw, gb = layers.dense_backward(g, cache, w)
            dense_grads.append((gw, gb))
        elif kind == "relu":
            g = layers.relu_backward(g, cache)
        elif kind == "dropout":
            g = layers.dropout_backward(g, cache)
    dense_grads.reverse()
    grads: list[np.ndarray] = []
    for gw, gb in dense_grads:
        grads.extend([gw, gb])
    return grads, g


@dataclass
class SaliencyModel:
    """Frozen encoders, feature normalizer, head, and optional hook."""

    encoders: tuple[Autoencoder, Autoencoder, Autoencoder]
    head: SaliencyHead
    feat_mean: np.ndarray
    feat_std: np.ndarray
    hook: str | None = None
    hook_len: int = 0

    @property
    def feature_len(self) -> int:
        return N_SCALES * CODE_LEN + N_LOW_LEVEL + self.hook_len


def fit_normalizer(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature mean and population std of low-level features.

    A feature that is constant on the training rows gets scale 1.0 rather
    than a tiny floor: dividing by a near-zero std would blow held-out
    values up by many orders of magnitude and saturate the head.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise DataError(f"normalizer needs an (n, f) matrix, got shape {rows.shape}")
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    std[std < 1e-8] = 1.0
    return mean, std


def _hook_block(model: SaliencyModel, screen: UiScreen, element: UiElement) -> np.ndarray:
    if model.hook is None:
        return np.zeros(0, dtype=np.float32)
    length, fn = get_feature_hook(model.hook)
    if length != model.hook_len:
        raise ConfigError(
            f"provider {model.hook!r} declares length {length} but the model "
            f"was built with {model.hook_len}"
        )
    block = np.asarray(fn(screen, element), dtype=np.float32).reshape(-1)
    if block.size != length:
        raise ConfigError(
            f"provider {model.hook!r} returned {block.size} values, declared {length}"
        )
    return block


def assemble_features(
    model: SaliencyModel, screen: UiScreen, element: UiElement
) -> np.ndarray:
    """[code(scale0) || code(scale1) || code(scale2) || z-scored low-level]."""
    if model.feat_mean is None or model.feat_std is None:
        raise NotFittedError("feature normalizer has not been fitted")
    triplet = extract_scales(screen, element)
    codes = [
        encode(ae, crop.astype(np.float32, copy=False))
        for ae, crop in zip(model.encoders, triplet)
    ]
    low = low_level_features(screen, element)
    z = (low - model.feat_mean) / model.feat_std
    parts = codes + [z.astype(np.float32)]
    hook = _hook_block(model, screen, element)
    if hook.size:
        parts.append(hook)
    return np.concatenate(parts).astype(np.float32)


def screen_features(model: SaliencyModel, screen: UiScreen) -> np.ndarray:
    """Feature matrix (k, D) for all elements of one screen.

    Elements are batched per scale through the encoders; the result is
    identical to stacking assemble_features over elements.
    """
    if model.feat_mean is None or model.feat_std is None:
        raise NotFittedError("feature normalizer has not been fitted")
    triplets = [list(extract_scales(screen, el)) for el in screen.elements]
    code_blocks = []
    for s, ae in enumerate(model.encoders):
        batch = crops_to_batch([t[s] for t in triplets])
        code_blocks.append(encode_batch(ae, batch))
    lows = np.stack([low_level_features(screen, el) for el in screen.elements])
    z = ((lows - model.feat_mean) / model.feat_std).astype(np.float32)
    parts = code_blocks + [z]
    if model.hook is not None:
        hooks = np.stack(
            [_hook_block(model, screen, el) for el in screen.elements]
        ).astype(np.float32)
        parts.append(hooks)
    return np.concatenate(parts, axis=1)


def predict_element(model: SaliencyModel, features: np.ndarray) -> float:
    """Raw sigmoid probability for one assembled feature vector."""
    features = np.asarray(features)
    if features.shape != (model.feature_len,):
        raise ShapeError(
            f"features must have shape ({model.feature_len},), got {features.shape}"
        )
    p, _ = head_forward(model.head, features[None, :])
    return float(p[0])


def predict_ui(model: SaliencyModel, screen: UiScreen) -> np.ndarray:
    """Per-element saliency normalized to sum to 1.

    When every raw probability underflows to zero (a fully saturated head)
    there is nothing to normalize and the distribution falls back to
    uniform instead of dividing by zero.
    """
    feats = screen_features(model, screen)
    raw, _ = head_forward(model.head, feats)
    raw = raw.astype(np.float64)
    total = raw.sum()
    if total <= 0.0:
        return np.full(raw.size, 1.0 / raw.size)
    return raw / total


# ---------------------------------------------------------------------------
# head training
# ---------------------------------------------------------------------------


def _batch_loss(cfg: TrainConfig, pred: np.ndarray, target: np.ndarray):
    if cfg.loss == "bce":
        return bce_loss(pred, target)
    return euclidean_loss(pred, target)


def train_saliency(
    model: SaliencyModel, screens: Sequence[UiScreen], cfg: TrainConfig
) -> tuple[SaliencyModel, TrainHistory]:
    """Trains the FC head on per-element soft targets with frozen encoders.

    A seeded fraction of the screens is held out for validation; the
    normalizer is fitted on the remaining training screens' elements, and
    the returned head carries the best-validation weights. When
    cfg.finetune_encoders is set, gradients also flow into the encoder
    convolutions (features are then recomputed every batch).
    """
    screens = list(screens)
    if not screens:
        raise DataError("training needs at least one screen")
    for i, s in enumerate(screens):
        if s.ground_truth is None:
            sid = s.screen_id if s.screen_id is not None else str(i)
            raise DataError(f"screen {sid} has no ground truth")

    root = SeededRng(cfg.seed).derive("head")
    train_idx, val_idx = _val_split(
        len(screens), cfg.validation_fraction, root.derive("split")
    )
    train_screens = [screens[i] for i in train_idx]
    val_screens = [screens[i] for i in val_idx]

    lows = np.vstack(
        [
            np.stack([low_level_features(s, el) for el in s.elements])
            for s in train_screens
        ]
    )
    model.feat_mean, model.feat_std = fit_normalizer(lows)

    if model.head.in_dim != model.feature_len:
        raise ShapeError(
            f"head expects {model.head.in_dim} features, model produces "
            f"{model.feature_len}"
        )
    finetune = cfg.finetune_encoders
    train_owners = [(s, el) for s in train_screens for el in s.elements]
    t_train = np.concatenate(
        [np.asarray(s.ground_truth, dtype=np.float64) for s in train_screens]
    )
    t_val = (
        np.concatenate([np.asarray(s.ground_truth, dtype=np.float64) for s in val_screens])
        if val_screens
        else None
    )

    def frozen_features(subset: Sequence[UiScreen]) -> np.ndarray:
        return np.concatenate([screen_features(model, s) for s in subset])

    if finetune:
        # Codes are recomputed every batch; only the static blocks are cached.
        z_train = np.vstack(
            [
                ((np.stack([low_level_features(s, el) for el in s.elements])
                  - model.feat_mean) / model.feat_std).astype(np.float32)
                for s in train_screens
            ]
        )
        hooks_train = (
            np.stack([_hook_block(model, s, el) for s, el in train_owners]).astype(np.float32)
            if model.hook is not None
            else None
        )
        x_train = None
        x_val = None
    else:
        x_train = frozen_features(train_screens)
        x_val = frozen_features(val_screens) if val_screens else None

    head = model.head
    params = head.params()
    decay = head.decay_flags()
    if finetune:
        for ae in model.encoders:
            params = params + [ae.w1, ae.b1, ae.w2, ae.b2]
            decay = decay + [True, False, True, False]
    state, step = _make_optimizer(cfg)
    shuffle_rng = root.derive("shuffle")
    dropout_rng = root.derive("dropout")

    def batch_features_finetune(idx: np.ndarray):
        owners = [train_owners[int(i)] for i in idx]
        triplets = [list(extract_scales(sc, el)) for sc, el in owners]
        codes, enc_caches = [], []
        for s, ae in enumerate(model.encoders):
            xb = crops_to_batch([t[s] for t in triplets])
            code, cache = encoder_forward_caches(ae, xb)
            codes.append(code.reshape(code.shape[0], -1))
            enc_caches.append(cache)
        parts = codes + [z_train[idx]]
        if hooks_train is not None:
            parts.append(hooks_train[idx])
        return np.concatenate(parts, axis=1), enc_caches

    history = TrainHistory()
    best_val = np.inf
    best_params = [p.copy() for p in params]
    since_best = 0
    n_train = t_train.size
    for epoch in range(cfg.epochs):
        perm = shuffle_rng.permutation(n_train)
        total = 0.0
        for start in range(0, n_train, cfg.batch):
            idx = perm[start : start + cfg.batch]
            if finetune:
                xb, enc_caches = batch_features_finetune(idx)
            else:
                xb = x_train[idx]
            tb = t_train[idx]
            pred, caches = head_forward(
                head, xb, dropout_rate=cfg.dropout, rng=dropout_rng, training=True
            )
            loss, gp = _batch_loss(cfg, pred, tb)
            grads, gx = head_backward(gp.astype(np.float32), caches)
            if finetune:
                for s in range(N_SCALES):
                    g_code = np.ascontiguousarray(
                        gx[:, s * CODE_LEN : (s + 1) * CODE_LEN]
                    ).reshape(-1, 16, 18, 32)
                    grads = grads + encoder_backward(g_code, enc_caches[s])
            step(params, grads, state, decay=decay)
            # bce_loss is already a per-element mean; euclidean_loss is a sum.
            total += loss * idx.size if cfg.loss == "bce" else loss
        history.train_loss.append(total / n_train)

        if finetune:
            x_eval = frozen_features(val_screens if val_screens else train_screens)
            t_eval = t_val if val_screens else t_train
        elif x_val is not None:
            x_eval, t_eval = x_val, t_val
        else:
            x_eval, t_eval = x_train, t_train
        vp, _ = head_forward(head, x_eval)
        vloss, _ = _batch_loss(cfg, vp, t_eval)
        if cfg.loss != "bce":
            vloss /= t_eval.size
        history.val_loss.append(vloss)
        if vloss < best_val:
            best_val = vloss
            best_params = [p.copy() for p in params]
            history.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if cfg.early_stop_patience and since_best >= cfg.early_stop_patience:
                break
    for p, best in zip(params, best_params):
        p[...] = best
    return model, history


# ---------------------------------------------------------------------------
# end-to-end fit
# ---------------------------------------------------------------------------


def collect_scale_crops(
    screens: Sequence[UiScreen], cfg: TrainConfig
) -> list[list[np.ndarray]]:
    """Per-scale crop lists over all elements, seeded-capped at ae_max_crops."""
    pairs = [(s, el) for s in screens for el in s.elements]
    if not pairs:
        raise DataError("no elements available for autoencoder pretraining")
    if cfg.ae_max_crops is not None and len(pairs) > cfg.ae_max_crops:
        rng = SeededRng(cfg.seed).derive("ae-crop-subset")
        keep = rng.choice_no_replace(len(pairs), cfg.ae_max_crops)
        pairs = [pairs[int(i)] for i in np.sort(keep)]
    per_scale: list[list[np.ndarray]] = [[], [], []]
    for screen, el in pairs:
        triplet = extract_scales(screen, el)
        for s, crop in enumerate(triplet):
            per_scale[s].append(crop.astype(np.float32))
    return per_scale


def fit_predictor(
    screens: Sequence[UiScreen],
    cfg: TrainConfig,
    encoders: Sequence[Autoencoder] | None = None,
) -> tuple[SaliencyModel, dict[str, TrainHistory]]:
    """Pretrains the three autoencoders, then trains the saliency head.

    Passing `encoders` (three pretrained autoencoders) skips pretraining.
    """
    screens = list(screens)
    histories: dict[str, TrainHistory] = {}
    if encoders is None:
        per_scale = collect_scale_crops(screens, cfg)
        encoders = []
        for s in range(N_SCALES):
            ae, hist = pretrain_autoencoder(per_scale[s], cfg, stream=f"scale{s}")
            encoders.append(ae)
            histories[f"ae{s}"] = hist
    elif len(encoders) != N_SCALES:
        raise ConfigError(f"expected {N_SCALES} encoders, got {len(encoders)}")
    hook_len = get_feature_hook(cfg.hook)[0] if cfg.hook is not None else 0
    in_dim = N_SCALES * CODE_LEN + N_LOW_LEVEL + hook_len
    head = SaliencyHead.init(
        SeededRng(cfg.seed).derive("head-init"), in_dim, cfg.head_widths
    )
    model = SaliencyModel(
        encoders=tuple(encoders),
        head=head,
        feat_mean=None,
        feat_std=None,
        hook=cfg.hook,
        hook_len=hook_len,
    )
    model, head_hist = train_saliency(model, screens, cfg)
    histories["head"] = head_hist
    return model, histories


class SaliencyPredictor(BaseEstimator):
    """Estimator facade: fit on UiScreens with ground truth, predict vectors.

    Hyperparameters mirror TrainConfig. fit() expects a sequence of
    UiScreen objects whose ground_truth is set; predict() accepts a single
    UiScreen or a sequence and returns the normalized saliency vector(s).
    """

    def __init__(
        self,
        batch: int = 30,
        epochs: int = 20,
        ae_epochs: int | None = None,
        optimizer: str = "adam",
        lr: float = 1e-5,
        ae_lr: float = 1e-3,
        l2: float = 1e-4,
        dropout: float = 0.5,
        corruption_f: float = 0.25,
        loss: str = "bce",
        seed: int = 0,
        validation_fraction: float = 0.1,
        early_stop_patience: int = 0,
        ae_max_crops: int | None = None,
        head_widths: tuple[int, int] = (512, 128),
        finetune_encoders: bool = False,
        hook: str | None = None,
    ):
        self.batch = batch
        self.epochs = epochs
        self.ae_epochs = ae_epochs
        self.optimizer = optimizer
        self.lr = lr
        self.ae_lr = ae_lr
        self.l2 = l2
        self.dropout = dropout
        self.corruption_f = corruption_f
        self.loss = loss
        self.seed = seed
        self.validation_fraction = validation_fraction
        self.early_stop_patience = early_stop_patience
        self.ae_max_crops = ae_max_crops
        self.head_widths = head_widths
        self.finetune_encoders = finetune_encoders
        self.hook = hook

    def _config(self) -> TrainConfig:
        return TrainConfig(**{k: v for k, v in self.get_params().items()})

    def fit(self, X: Sequence[UiScreen], y=None) -> "SaliencyPredictor":
        self.model_, self.history_ = fit_predictor(list(X), self._config())
        return self

    def predict(self, X):
        if not hasattr(self, "model_"):
            raise NotFittedError("SaliencyPredictor.predict called before fit")
        if isinstance(X, UiScreen):
            return predict_ui(self.model_, X)
        return [predict_ui(self.model_, s) for s in X]


def copy_model(model: SaliencyModel) -> SaliencyModel:
    """Deep copy of all parameters (used for best-weights snapshots)."""
    return SaliencyModel(
        encoders=tuple(ae.copy() for ae in model.encoders),
        head=model.head.copy(),
        feat_mean=None if model.feat_mean is None else model.feat_mean.copy(),
        feat_std=None if model.feat_std is None else model.feat_std.copy(),
        hook=model.hook,
        hook_len=model.hook_len,
    )


__all__ = [
    "Autoencoder",
    "CODE_LEN",
    "FEATURE_LEN",
    "SaliencyHead",
    "SaliencyModel",
    "SaliencyPredictor",
    "TrainConfig",
    "TrainHistory",
    "ae_backward",
    "ae_forward",
    "assemble_features",
    "collect_scale_crops",
    "copy_model",
    "encode",
    "encode_batch",
    "encoder_forward",
    "fit_normalizer",
    "fit_predictor",
    "get_feature_hook",
    "head_backward",
    "head_forward",
    "predict_element",
    "predict_ui",
    "pretrain_autoencoder",
    "register_feature_hook",
    "screen_features",
    "train_saliency",
    "unregister_feature_hook",
]
