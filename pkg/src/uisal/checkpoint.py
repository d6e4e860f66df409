"""Binary checkpoint container for model parameters.

Layout (all integers little-endian):

    magic            6 bytes  b"UISAL1"
    format version   u32
    metadata length  u64
    metadata         UTF-8 JSON (sorted keys, compact separators)
    tensors, repeated until end of file:
        name length  u32
        name         UTF-8
        rank         u32
        dims         u64 per axis
        values       float32, row-major

Tensors are written sorted by name and the metadata serialization is
canonical, so save -> load -> save reproduces the file byte for byte.
Model parameters are float32 natively; everything that must survive with
full precision (normalizer stats, config) lives in the JSON metadata,
which round-trips float64 exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from uisal import __version__
from uisal.errors import ConfigError, DataError
from uisal.model import (
    Autoencoder,
    SaliencyHead,
    SaliencyModel,
    TrainConfig,
    get_feature_hook,
)

MAGIC = b"UISAL1"
FORMAT_VERSION = 1

_AE_FIELDS = ("w1", "b1", "w2", "b2", "w3", "b3", "w4", "b4", "w5", "b5")
_HEAD_FIELDS = ("w1", "b1", "w2", "b2", "w3", "b3")


def save_tensors(path, tensors: dict[str, np.ndarray], metadata: dict) -> None:
    """Writes named float32 tensors plus a JSON metadata blob."""
    for name, t in tensors.items():
        if not isinstance(t, np.ndarray) or t.dtype != np.float32:
            raise DataError(f"tensor {name!r} must be float32, got {getattr(t, 'dtype', type(t))}")
    meta = json.dumps(metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(meta)))
        fh.write(meta)
        for name in sorted(tensors):
            t = tensors[name]
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", t.ndim))
            for d in t.shape:
                fh.write(struct.pack("<Q", d))
            fh.write(np.ascontiguousarray(t).astype("<f4", copy=False).tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise DataError(f"truncated checkpoint while reading {what}")
    return data


def load_tensors(path) -> tuple[dict[str, np.ndarray], dict]:
    """Reads a container written by save_tensors; returns (tensors, metadata)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise DataError(f"not a checkpoint file: bad magic {magic!r}")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "format version"))
        if version != FORMAT_VERSION:
            raise DataError(
                f"unsupported checkpoint format version {version} "
                f"(supported: {FORMAT_VERSION})"
            )
        (meta_len,) = struct.unpack("<Q", _read_exact(fh, 8, "metadata length"))
        try:
            metadata = json.loads(_read_exact(fh, meta_len, "metadata").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DataError(f"corrupt checkpoint metadata: {exc}") from exc
        tensors: dict[str, np.ndarray] = {}
        while True:
            head = fh.read(4)
            if not head:
                break
            if len(head) != 4:
                raise DataError("truncated checkpoint while reading tensor name length")
            (name_len,) = struct.unpack("<I", head)
            name = _read_exact(fh, name_len, "tensor name").decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(fh, 4, f"rank of {name!r}"))
            dims = struct.unpack(
                "<" + "Q" * rank, _read_exact(fh, 8 * rank, f"dims of {name!r}")
            )
            count = int(np.prod(dims, dtype=np.int64)) if rank else 1
            raw = _read_exact(fh, 4 * count, f"values of {name!r}")
            tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    return tensors, metadata


def model_tensors(model: SaliencyModel) -> dict[str, np.ndarray]:
    """Flat {name: tensor} view of all trainable parameters."""
    out: dict[str, np.ndarray] = {}
    for s, ae in enumerate(model.encoders):
        for field, p in zip(_AE_FIELDS, ae.params()):
            out[f"enc{s}.{field}"] = p
    for field, p in zip(_HEAD_FIELDS, model.head.params()):
        out[f"head.{field}"] = p
    return out


def save_model(
    path,
    model: SaliencyModel,
    config: TrainConfig | None = None,
    extra_metadata: dict | None = None,
) -> None:
    """Serializes a fitted model (parameters + normalizer + hook info)."""
    if model.feat_mean is None or model.feat_std is None:
        raise DataError("cannot save a model whose normalizer is not fitted")
    metadata = {
        "model_version": f"uisal-{__version__}",
        "feature_len": model.feature_len,
        "normalizer": {
            "mean": [float(v) for v in model.feat_mean],
            "std": [float(v) for v in model.feat_std],
        },
        "hook": None
        if model.hook is None
        else {"name": model.hook, "length": model.hook_len},
        "config": None if config is None else config.to_dict(),
    }
    if extra_metadata:
        metadata.update(extra_metadata)
    save_tensors(path, model_tensors(model), metadata)


def load_model(path) -> tuple[SaliencyModel, dict]:
    """Rebuilds a SaliencyModel from a checkpoint; returns (model, metadata).

    A declared external feature provider must be registered (with the same
    block length) at load time.
    """
    tensors, metadata = load_tensors(path)
    missing = []
    encoders = []
    for s in range(3):
        fields = []
        for field in _AE_FIELDS:
            name = f"enc{s}.{field}"
            if name not in tensors:
                missing.append(name)
            else:
                fields.append(tensors[name])
        if len(fields) == len(_AE_FIELDS):
            encoders.append(Autoencoder(*fields))
    head_fields = []
    for field in _HEAD_FIELDS:
        name = f"head.{field}"
        if name not in tensors:
            missing.append(name)
        else:
            head_fields.append(tensors[name])
    if missing:
        raise DataError(f"checkpoint is missing tensors: {', '.join(missing)}")

    norm = metadata.get("normalizer")
    if not isinstance(norm, dict) or "mean" not in norm or "std" not in norm:
        raise DataError("checkpoint metadata lacks normalizer stats")
    hook_meta = metadata.get("hook")
    hook_name = None
    hook_len = 0
    if hook_meta is not None:
        hook_name = hook_meta["name"]
        hook_len = int(hook_meta["length"])
        declared, _ = get_feature_hook(hook_name)  # raises ConfigError if absent
        if declared != hook_len:
            raise ConfigError(
                f"provider {hook_name!r} is registered with length {declared} "
                f"but the checkpoint was built with {hook_len}"
            )
    model = SaliencyModel(
        encoders=tuple(encoders),
        head=SaliencyHead(*head_fields),
        feat_mean=np.asarray(norm["mean"], dtype=np.float64),
        feat_std=np.asarray(norm["std"], dtype=np.float64),
        hook=hook_name,
        hook_len=hook_len,
    )
    if model.head.in_dim != model.feature_len:
        raise DataError(
            f"checkpoint head expects {model.head.in_dim} features but the "
            f"model assembles {model.feature_len}"
        )
    return model, metadata


def save_density_maps(path, maps: dict[str, np.ndarray], metadata: dict | None = None) -> None:
    """Stores exact pixel-density grids in the tensor container."""
    tensors = {name: np.asarray(m, dtype=np.float32) for name, m in maps.items()}
    save_tensors(path, tensors, metadata or {})


__all__ = [
    "FORMAT_VERSION",
    "MAGIC",
    "load_model",
    "load_tensors",
    "model_tensors",
    "save_density_maps",
    "save_model",
    "save_tensors",
]
