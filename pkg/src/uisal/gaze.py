"""Gaze calibration, fixation maps, and element-level ground truth.

Raw gaze points are calibrated per session with an affine least-squares
model fit on a deterministic 3:1 frame split. Calibrated points become a
pixel-level density by summing one Gaussian kernel per fixation, shaped by
the session's residual covariance, evaluated at pixel centers (pixel (x, y)
has its center at integer coordinates (x, y)). Pixel density is integrated
into per-element probabilities through an ownership raster where the
smallest element covering a pixel owns it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from uisal.errors import (
    DataError,
    DegenerateCalibrationError,
    EmptyFixationError,
    InsufficientDataError,
    NumericError,
)
from uisal.features import UiElement, UiScreen

MIN_CALIBRATION_POINTS = 8
SINGULAR_COV_BUMP = 0.25
DEFAULT_TRUNCATE_SIGMAS = 4.0


def _as_points(arr, name: str) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != 2 or out.shape[1] != 2:
        raise DataError(f"{name} must be an (n, 2) array, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise DataError(f"{name} contains non-finite coordinates")
    return out


@dataclass(frozen=True)
class CalibrationModel:
    """Affine gaze correction with its test-split residual statistics."""

    coef: np.ndarray  # (2, 3): row i maps (x, y, 1) -> output coordinate i
    covariance: np.ndarray  # (2, 2) sample covariance of test residuals
    rmse: float
    rmse_uncalibrated: float
    n_train: int
    n_test: int


def split_calibration_frames(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic 3:1 split: frame indices congruent to 3 mod 4 go to test."""
    idx = np.arange(n)
    test = idx[idx % 4 == 3]
    train = idx[idx % 4 != 3]
    return train, test


def fit_calibration(raw, truth) -> CalibrationModel:
    """Least-squares affine calibration from raw gaze to truth targets.

    Points are paired by frame index (row order). Every fourth frame is
    held out; the residual covariance and RMSE are measured on that test
    split only.
    """
    raw = _as_points(raw, "raw")
    truth = _as_points(truth, "truth")
    if raw.shape[0] != truth.shape[0]:
        raise DataError(
            f"raw has {raw.shape[0]} points but truth has {truth.shape[0]}"
        )
    n = raw.shape[0]
    if n < MIN_CALIBRATION_POINTS:
        raise InsufficientDataError(
            f"calibration needs at least {MIN_CALIBRATION_POINTS} points, got {n}"
        )
    train, test = split_calibration_frames(n)
    design = np.column_stack([raw[train], np.ones(train.size)])
    if np.linalg.matrix_rank(design) < 3:
        raise DegenerateCalibrationError(
            "calibration points are collinear; affine fit is underdetermined"
        )
    coef, *_ = np.linalg.lstsq(design, truth[train], rcond=None)
    coef = coef.T  # (2, 3)

    test_design = np.column_stack([raw[test], np.ones(test.size)])
    pred = test_design @ coef.T
    resid = truth[test] - pred
    if test.size >= 2:
        cov = np.cov(resid.T, ddof=1)
    else:
        cov = np.zeros((2, 2))
    rmse = float(np.sqrt(np.mean(np.sum(resid**2, axis=1))))
    raw_resid = truth[test] - raw[test]
    rmse_raw = float(np.sqrt(np.mean(np.sum(raw_resid**2, axis=1))))
    return CalibrationModel(
        coef=coef,
        covariance=np.atleast_2d(cov),
        rmse=rmse,
        rmse_uncalibrated=rmse_raw,
        n_train=int(train.size),
        n_test=int(test.size),
    )


def apply_calibration(
    model: CalibrationModel, points, dims: tuple[int, int] | None = None
) -> np.ndarray:
    """Applies the affine map; clamps into [0, W-1] x [0, H-1] when dims given."""
    pts = _as_points(points, "points")
    design = np.column_stack([pts, np.ones(pts.shape[0])])
    out = design @ model.coef.T
    if dims is not None:
        w, h = dims
        out[:, 0] = np.clip(out[:, 0], 0, w - 1)
        out[:, 1] = np.clip(out[:, 1], 0, h - 1)
    return out


class GazeCalibrator(BaseEstimator):
    """Estimator wrapper over the affine calibration fit.

    fit(X, y) takes raw gaze points X and target points y, both (n, 2);
    predict(X) returns calibrated points, optionally clamped to a screen.
    """

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = check_array(y, dtype=np.float64)
        model = fit_calibration(X, y)
        self.coef_ = model.coef
        self.covariance_ = model.covariance
        self.rmse_ = model.rmse
        self.rmse_uncalibrated_ = model.rmse_uncalibrated
        self.n_train_ = model.n_train
        self.n_test_ = model.n_test
        return self

    def _model(self) -> CalibrationModel:
        check_is_fitted(self, "coef_")
        return CalibrationModel(
            coef=self.coef_,
            covariance=self.covariance_,
            rmse=self.rmse_,
            rmse_uncalibrated=self.rmse_uncalibrated_,
            n_train=self.n_train_,
            n_test=self.n_test_,
        )

    def predict(self, X, dims: tuple[int, int] | None = None) -> np.ndarray:
        X = check_array(X, dtype=np.float64)
        return apply_calibration(self._model(), X, dims=dims)

    def transform(self, X) -> np.ndarray:
        return self.predict(X)


@dataclass(frozen=True)
class PixelSaliencyMap:
    """A normalized nonnegative density over the pixel grid."""

    width: int
    height: int
    density: np.ndarray  # (height, width) float64

    def __post_init__(self):
        if self.density.shape != (self.height, self.width):
            raise DataError(
                f"density shape {self.density.shape} does not match "
                f"{self.height}x{self.width}"
            )
        if np.any(self.density < 0):
            raise DataError("density entries must be nonnegative")
        total = float(self.density.sum())
        if abs(total - 1.0) > 1e-6:
            raise DataError(f"density sums to {total:.9f}, expected 1")


def regularize_covariance(cov) -> np.ndarray:
    """Symmetrizes; bumps the diagonal by 0.25 px^2 if (near-)singular."""
    cov = np.asarray(cov, dtype=np.float64)
    if cov.shape != (2, 2):
        raise DataError(f"covariance must be 2x2, got shape {cov.shape}")
    cov = (cov + cov.T) / 2.0
    if np.linalg.eigvalsh(cov)[0] < 1e-9:
        cov = cov + SINGULAR_COV_BUMP * np.eye(2)
    return cov


def fixations_to_pixel_saliency(
    points,
    dims: tuple[int, int],
    cov,
    truncate_sigmas: float | None = DEFAULT_TRUNCATE_SIGMAS,
) -> PixelSaliencyMap:
    """Sums one Gaussian kernel per fixation and normalizes to total mass 1.

    Each kernel is evaluated at pixel centers inside an axis-aligned box of
    half-extent `truncate_sigmas` marginal standard deviations around the
    fixation (the bounding box of the corresponding principal-axes
    ellipse); None evaluates the full grid. The same covariance shapes
    every kernel, so the Gaussian normalization constant cancels in the
    global normalization.
    """
    pts = _as_points(points, "fixations")
    if pts.shape[0] == 0:
        raise EmptyFixationError("cannot build a saliency map from zero fixations")
    w, h = int(dims[0]), int(dims[1])
    if w < 1 or h < 1:
        raise DataError(f"map dims must be positive, got {dims}")
    cov = regularize_covariance(cov)
    inv = np.linalg.inv(cov)
    density = np.zeros((h, w), dtype=np.float64)
    if truncate_sigmas is None:
        hx, hy = float("inf"), float("inf")
    else:
        hx = truncate_sigmas * math.sqrt(cov[0, 0])
        hy = truncate_sigmas * math.sqrt(cov[1, 1])
    for fx, fy in pts:
        x0 = max(0, int(math.ceil(fx - hx))) if math.isfinite(hx) else 0
        x1 = min(w - 1, int(math.floor(fx + hx))) if math.isfinite(hx) else w - 1
        y0 = max(0, int(math.ceil(fy - hy))) if math.isfinite(hy) else 0
        y1 = min(h - 1, int(math.floor(fy + hy))) if math.isfinite(hy) else h - 1
        if x1 < x0 or y1 < y0:
            continue
        dx = np.arange(x0, x1 + 1, dtype=np.float64) - fx
        dy = np.arange(y0, y1 + 1, dtype=np.float64) - fy
        quad = (
            inv[0, 0] * dx[None, :] ** 2
            + 2.0 * inv[0, 1] * dy[:, None] * dx[None, :]
            + inv[1, 1] * dy[:, None] ** 2
        )
        density[y0 : y1 + 1, x0 : x1 + 1] += np.exp(-0.5 * quad)
    total = float(density.sum())
    if total <= 0.0:
        raise NumericError("fixation kernels contributed zero mass inside the image")
    density /= total
    return PixelSaliencyMap(width=w, height=h, density=density)


def resolve_element_ownership(
    elements: list[UiElement], dims: tuple[int, int]
) -> np.ndarray:
    """Per-pixel owner ids: smallest covering element wins, ties by lower id.

    Pixels covered by no element get -1, so element ids must be
    nonnegative.
    """
    w, h = int(dims[0]), int(dims[1])
    for e in elements:
        if e.id < 0:
            raise DataError(f"element ids must be nonnegative, got {e.id}")
    raster = np.full((h, w), -1, dtype=np.int64)
    order = sorted(elements, key=lambda e: (-e.bbox.area, -e.id))
    for e in order:
        b = e.bbox
        raster[b.y0 : b.y1, b.x0 : b.x1] = e.id
    return raster


def pixel_to_element_saliency(
    pmap: PixelSaliencyMap, elements: list[UiElement], raster: np.ndarray
) -> tuple[np.ndarray, bool]:
    """Integrates owned pixel density per element and normalizes.

    Returns (vector, uniform_fallback). The fallback flag is set when no
    density lands on any element, in which case the vector is uniform 1/k.
    """
    if not elements:
        raise DataError("cannot integrate saliency over zero elements")
    if raster.shape != pmap.density.shape:
        raise DataError(
            f"ownership raster {raster.shape} does not match map {pmap.density.shape}"
        )
    masses = element_masses(pmap.density, elements, raster)
    total = float(masses.sum())
    if total <= 0.0:
        k = len(elements)
        return np.full(k, 1.0 / k), True
    return masses / total, False


def element_masses(
    density: np.ndarray, elements: list[UiElement], raster: np.ndarray
) -> np.ndarray:
    """Pre-normalization owned density per element, in element-list order."""
    return np.array(
        [float(density[raster == e.id].sum()) for e in elements], dtype=np.float64
    )


@dataclass(frozen=True)
class GazeSession:
    """One viewer's session: calibration pairs plus on-screen gaze points."""

    calibration_raw: np.ndarray
    calibration_truth: np.ndarray
    gaze: np.ndarray


def screen_ground_truth(
    screen: UiScreen,
    sessions: list[GazeSession],
    truncate_sigmas: float | None = DEFAULT_TRUNCATE_SIGMAS,
) -> tuple[np.ndarray, bool, PixelSaliencyMap]:
    """Element ground truth from raw sessions.

    Per session: fit calibration, calibrate and clamp the gaze points, blur
    with the session covariance. Session maps are averaged with equal
    weight and renormalized; the ownership raster then splits the average
    map into element probabilities. Returns (vector, uniform_fallback,
    averaged pixel map).
    """
    if not sessions:
        raise InsufficientDataError("need at least one gaze session")
    dims = (screen.width, screen.height)
    acc = np.zeros((screen.height, screen.width), dtype=np.float64)
    for s in sessions:
        model = fit_calibration(s.calibration_raw, s.calibration_truth)
        fix = apply_calibration(model, s.gaze, dims=dims)
        pmap = fixations_to_pixel_saliency(
            fix, dims, model.covariance, truncate_sigmas=truncate_sigmas
        )
        acc += pmap.density
    acc /= acc.sum()
    avg_map = PixelSaliencyMap(width=screen.width, height=screen.height, density=acc)
    raster = resolve_element_ownership(screen.elements, dims)
    vec, fallback = pixel_to_element_saliency(avg_map, screen.elements, raster)
    return vec, fallback, avg_map
