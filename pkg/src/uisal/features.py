"""Screen/element types, multi-scale crops, corruption, and low-level features.

A screen is an RGB raster in [0, 1] plus an ordered element list. For each
element three crops are produced: the element itself, a surround whose
bounds sit midway between the element and the image border, and the whole
image. Every crop is resized to 162x288x3 (rows x cols x channels)
regardless of aspect ratio. The 17 low-level features are the element
geometry (width, height, area, center) plus first and second color moments
of the element region and of the whole image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from uisal.errors import ConfigError, DataError
from uisal.rng import SeededRng

CROP_H = 162
CROP_W = 288
N_LOW_LEVEL = 17


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


@dataclass(frozen=True)
class BoundingBox:
    """Half-open pixel box: columns [x0, x1), rows [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        for name in ("x0", "y0", "x1", "y1"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)):
                raise DataError(f"bbox {name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if not (0 <= self.x0 < self.x1):
            raise DataError(f"bbox needs 0 <= x0 < x1, got x0={self.x0}, x1={self.x1}")
        if not (0 <= self.y0 < self.y1):
            raise DataError(f"bbox needs 0 <= y0 < y1, got y0={self.y0}, y1={self.y1}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    def contains(self, other: "BoundingBox") -> bool:
        return (
            self.x0 <= other.x0
            and self.y0 <= other.y0
            and other.x1 <= self.x1
            and other.y1 <= self.y1
        )


@dataclass(frozen=True)
class UiElement:
    """One annotated UI element."""

    id: int
    bbox: BoundingBox


class UiScreen:
    """An RGB screenshot with its element list and optional ground truth."""

    def __init__(
        self,
        image: np.ndarray,
        elements: list[UiElement],
        ground_truth: np.ndarray | None = None,
        screen_id: str | None = None,
    ):
        image = np.asarray(image)
        if image.ndim != 3 or image.shape[2] != 3:
            raise DataError(f"image must be HxWx3, got shape {image.shape}")
        if not np.issubdtype(image.dtype, np.floating):
            raise DataError(f"image must be floating point, got dtype {image.dtype}")
        if image.size == 0:
            raise DataError("image has zero pixels")
        if not np.all(np.isfinite(image)):
            raise DataError("image contains non-finite values")
        if image.min() < 0.0 or image.max() > 1.0:
            raise DataError("image values must lie in [0, 1]")
        if not elements:
            raise DataError("a screen needs at least one element")
        ids = [e.id for e in elements]
        if len(set(ids)) != len(ids):
            raise DataError(f"element ids must be unique, got {ids}")
        h, w = image.shape[:2]
        for e in elements:
            if e.bbox.x1 > w or e.bbox.y1 > h:
                raise DataError(
                    f"element {e.id} bbox {e.bbox} exceeds image bounds {w}x{h}"
                )
        if ground_truth is not None:
            ground_truth = np.asarray(ground_truth, dtype=np.float64)
            if ground_truth.shape != (len(elements),):
                raise DataError(
                    f"ground truth length {ground_truth.shape} does not match "
                    f"{len(elements)} elements"
                )
            if np.any(ground_truth < 0):
                raise DataError("ground truth entries must be nonnegative")
            if abs(float(ground_truth.sum()) - 1.0) > 1e-6:
                raise DataError(
                    f"ground truth sums to {ground_truth.sum():.9f}, expected 1"
                )
        self.image = image
        self.elements = list(elements)
        self.ground_truth = ground_truth
        self.screen_id = screen_id

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @cached_property
    def image_moments(self) -> np.ndarray:
        """Whole-raster color moments, computed once per screen."""
        return color_moments(self.image)


@dataclass(frozen=True)
class ScaleTriplet:
    """The three resized crops for one element (each 162x288x3)."""

    scale0: np.ndarray
    scale1: np.ndarray
    scale2: np.ndarray

    def __iter__(self):
        return iter((self.scale0, self.scale1, self.scale2))


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers and edge clamping.

    Source coordinates are (i + 0.5) * scale - 0.5 per axis; out-of-range
    taps clamp to the border. A target equal to the source dims reproduces
    the input exactly.
    """
    if image.ndim == 2:
        return resize_bilinear(image[:, :, None], out_h, out_w)[:, :, 0]
    src_h, src_w = image.shape[:2]
    if src_h < 1 or src_w < 1:
        raise DataError("cannot resize an empty image")
    sy = (np.arange(out_h) + 0.5) * (src_h / out_h) - 0.5
    sx = (np.arange(out_w) + 0.5) * (src_w / out_w) - 0.5
    y0 = np.clip(np.floor(sy), 0, src_h - 1).astype(np.int64)
    x0 = np.clip(np.floor(sx), 0, src_w - 1).astype(np.int64)
    y1 = np.minimum(y0 + 1, src_h - 1)
    x1 = np.minimum(x0 + 1, src_w - 1)
    wy = np.clip(sy - y0, 0.0, 1.0).astype(image.dtype)
    wx = np.clip(sx - x0, 0.0, 1.0).astype(image.dtype)
    top = image[y0][:, x0] * (1.0 - wx)[None, :, None] + image[y0][:, x1] * wx[None, :, None]
    bot = image[y1][:, x0] * (1.0 - wx)[None, :, None] + image[y1][:, x1] * wx[None, :, None]
    return top * (1.0 - wy)[:, None, None] + bot * wy[:, None, None]


def scale1_bounds(bbox: BoundingBox, width: int, height: int) -> BoundingBox:
    """Surround-crop bounds: midway between the element and the image border."""
    return BoundingBox(
        _round_half_up(bbox.x0 / 2.0),
        _round_half_up(bbox.y0 / 2.0),
        _round_half_up((bbox.x1 + width) / 2.0),
        _round_half_up((bbox.y1 + height) / 2.0),
    )


def extract_scales(screen: UiScreen, element: UiElement) -> ScaleTriplet:
    """The element crop, its midpoint surround, and the whole image,
    each resized to 162x288x3."""
    b = element.bbox
    s1 = scale1_bounds(b, screen.width, screen.height)
    crop0 = screen.image[b.y0 : b.y1, b.x0 : b.x1]
    crop1 = screen.image[s1.y0 : s1.y1, s1.x0 : s1.x1]
    return ScaleTriplet(
        resize_bilinear(crop0, CROP_H, CROP_W),
        resize_bilinear(crop1, CROP_H, CROP_W),
        resize_bilinear(screen.image, CROP_H, CROP_W),
    )


def corrupt_pixels(crop: np.ndarray, f: float, rng: SeededRng) -> np.ndarray:
    """Zero out exactly round(f*H*W) distinct pixels (all three channels)."""
    if not 0.0 <= f <= 1.0:
        raise ConfigError(f"corruption fraction must be in [0, 1], got {f}")
    h, w = crop.shape[:2]
    n = _round_half_up(f * h * w)
    out = crop.copy()
    if n == 0:
        return out
    idx = rng.choice_no_replace(h * w, n)
    out.reshape(-1, crop.shape[2])[idx] = 0
    return out


def color_moments(region: np.ndarray) -> np.ndarray:
    """First and second color moments (M_R, M_G, M_B, s_R, s_G, s_B).

    M is the per-channel mean; s the population standard deviation
    sqrt(mean((p - M)^2)).
    """
    region = np.asarray(region, dtype=np.float64)
    if region.ndim < 2 or region.shape[-1] != 3:
        raise DataError(f"region must be (..., 3), got shape {region.shape}")
    flat = region.reshape(-1, 3)
    if flat.shape[0] == 0:
        raise DataError("cannot take color moments of an empty region")
    m = flat.mean(axis=0)
    s = np.sqrt(np.mean((flat - m) ** 2, axis=0))
    return np.concatenate([m, s])


def low_level_features(screen: UiScreen, element: UiElement) -> np.ndarray:
    """The 17 per-element features: geometry plus element and image moments."""
    b = element.bbox
    cx, cy = b.center
    elem_region = screen.image[b.y0 : b.y1, b.x0 : b.x1]
    return np.concatenate(
        [
            np.array([b.width, b.height, b.area, cx, cy], dtype=np.float64),
            color_moments(elem_region),
            screen.image_moments,
        ]
    )
