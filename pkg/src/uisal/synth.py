"""Synthetic UI screens with a known element-saliency rule.

Screens are pastel backgrounds with solid rectangles and striped "text"
blocks placed non-overlapping-first (overlap is allowed only after
placement retries run out). Ground truth follows a softmax rule over
measured quantities of the rendered image:

    gt_j = softmax(a * contrast_j + b * ln(area_j) - c * dist_j)

where contrast_j is |mean element luminance - background luminance|
(Rec. 601 weights), area_j is the bbox pixel area, and dist_j is the
element center's distance to the top-left corner normalized by the image
diagonal. Optional synthetic gaze sessions exercise the calibration and
fixation pipeline: raw points are pushed through the inverse of a hidden
per-session affine map which calibration can then recover.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from uisal.errors import ConfigError, DataError
from uisal.features import BoundingBox, UiElement, UiScreen
from uisal.gaze import GazeSession
from uisal.rng import SeededRng

_LUMA = np.array([0.299, 0.587, 0.114])
MIN_ELEMENT_PX = 8
_PLACEMENT_TRIES = 40


@dataclass
class SynthConfig:
    """Generator settings; every output is a pure function of these."""

    screen_count: int = 10
    width: int = 360
    height: int = 640
    min_elements: int = 4
    max_elements: int = 50
    seed: int = 0
    a: float = 2.0
    b: float = 0.5
    c: float = 3.0
    sessions_per_screen: int = 0
    calibration_points: int = 12
    gaze_points: int = 60
    calibration_noise: float = 2.0

    def __post_init__(self):
        if self.screen_count < 1:
            raise ConfigError(f"screen_count must be >= 1, got {self.screen_count}")
        if self.min_elements < 1 or self.max_elements < self.min_elements:
            raise ConfigError(
                f"element count range [{self.min_elements}, {self.max_elements}] invalid"
            )
        if self.sessions_per_screen < 0:
            raise ConfigError("sessions_per_screen must be >= 0")
        if self.sessions_per_screen > 0:
            if self.calibration_points < 8:
                raise ConfigError("calibration_points must be >= 8 to fit a session")
            if self.gaze_points < 1:
                raise ConfigError("gaze_points must be >= 1")

    def to_dict(self) -> dict:
        return {
            "screen_count": self.screen_count,
            "width": self.width,
            "height": self.height,
            "min_elements": self.min_elements,
            "max_elements": self.max_elements,
            "seed": self.seed,
            "a": self.a,
            "b": self.b,
            "c": self.c,
            "sessions_per_screen": self.sessions_per_screen,
            "calibration_points": self.calibration_points,
            "gaze_points": self.gaze_points,
            "calibration_noise": self.calibration_noise,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown synth config keys: {', '.join(unknown)}")
        return cls(**d)


def saliency_rule(
    contrast: np.ndarray,
    area: np.ndarray,
    dist: np.ndarray,
    a: float,
    b: float,
    c: float,
) -> np.ndarray:
    """softmax(a*contrast + b*ln(area) - c*dist), computed stably."""
    contrast = np.asarray(contrast, dtype=np.float64)
    area = np.asarray(area, dtype=np.float64)
    dist = np.asarray(dist, dtype=np.float64)
    score = a * contrast + b * np.log(area) - c * dist
    score = score - score.max()
    e = np.exp(score)
    return e / e.sum()


def _overlaps(box: BoundingBox, others: list[BoundingBox]) -> bool:
    for o in others:
        if box.x0 < o.x1 and o.x0 < box.x1 and box.y0 < o.y1 and o.y0 < box.y1:
            return True
    return False


def _place_elements(cfg: SynthConfig, rng: SeededRng) -> list[BoundingBox]:
    k = cfg.min_elements + int(
        rng.integers(0, cfg.max_elements - cfg.min_elements + 1, 1)[0]
    )
    boxes: list[BoundingBox] = []
    for _ in range(k):
        chosen = None
        for attempt in range(_PLACEMENT_TRIES):
            w = max(MIN_ELEMENT_PX, int(round(float(rng.uniform(())) * 0.22 * cfg.width + 0.08 * cfg.width)))
            h = max(MIN_ELEMENT_PX, int(round(float(rng.uniform(())) * 0.18 * cfg.height + 0.05 * cfg.height)))
            w = min(w, cfg.width)
            h = min(h, cfg.height)
            x0 = int(rng.integers(0, cfg.width - w + 1, 1)[0])
            y0 = int(rng.integers(0, cfg.height - h + 1, 1)[0])
            candidate = BoundingBox(x0, y0, x0 + w, y0 + h)
            chosen = candidate
            if not _overlaps(candidate, boxes):
                break
        boxes.append(chosen)
    return boxes


def generate_screen(cfg: SynthConfig, index: int) -> UiScreen:
    """Renders one screen and computes its rule-based ground truth."""
    if cfg.width < 2 * MIN_ELEMENT_PX or cfg.height < 2 * MIN_ELEMENT_PX:
        raise DataError(
            f"dims {cfg.width}x{cfg.height} too small to place elements "
            f"(need at least {2 * MIN_ELEMENT_PX} pixels per side)"
        )
    rng = SeededRng(cfg.seed).derive(f"screen:{index}")
    bg = 0.60 + 0.35 * rng.uniform((3,))
    image = np.empty((cfg.height, cfg.width, 3), dtype=np.float32)
    image[:, :] = bg.astype(np.float32)

    boxes = _place_elements(cfg, rng.derive("layout"))
    paint = rng.derive("paint")
    for box in boxes:
        fill = paint.uniform((3,))
        striped = float(paint.uniform(())) < 0.4
        if striped:
            region = image[box.y0 : box.y1, box.x0 : box.x1]
            rows = np.arange(box.y0, box.y1) - box.y0
            on = (rows // 3) % 2 == 0
            region[on] = fill.astype(np.float32)
            region[~on] = bg.astype(np.float32)
        else:
            image[box.y0 : box.y1, box.x0 : box.x1] = fill.astype(np.float32)

    lum = np.asarray(image, dtype=np.float64) @ _LUMA
    bg_lum = float(bg @ _LUMA)
    diag = float(np.hypot(cfg.width, cfg.height))
    contrast = np.array(
        [abs(float(lum[b.y0 : b.y1, b.x0 : b.x1].mean()) - bg_lum) for b in boxes]
    )
    area = np.array([float(b.area) for b in boxes])
    dist = np.array([float(np.hypot(*b.center)) / diag for b in boxes])
    gt = saliency_rule(contrast, area, dist, cfg.a, cfg.b, cfg.c)

    elements = [UiElement(j, box) for j, box in enumerate(boxes)]
    return UiScreen(image, elements, ground_truth=gt, screen_id=f"synth{index}")


def _session_for_screen(
    screen: UiScreen, cfg: SynthConfig, rng: SeededRng
) -> GazeSession:
    w, h = float(screen.width), float(screen.height)
    # Hidden affine: truth = M raw + o. Raw points are generated by
    # inverting it, so a fitted calibration should recover M and o.
    m = np.eye(2) + 0.06 * (rng.uniform((2, 2)) * 2.0 - 1.0)
    o = (rng.uniform((2,)) * 2.0 - 1.0) * 0.02 * np.array([w, h])
    m_inv = np.linalg.inv(m)

    n_cal = cfg.calibration_points
    truth = np.column_stack(
        [rng.uniform((n_cal,)) * (w - 1.0), rng.uniform((n_cal,)) * (h - 1.0)]
    )
    noise = rng.normal((n_cal, 2)) * cfg.calibration_noise
    raw_cal = (truth + noise - o) @ m_inv.T

    gt = screen.ground_truth
    cum = np.cumsum(gt)
    picks = np.searchsorted(cum, rng.uniform((cfg.gaze_points,)), side="right")
    picks = np.minimum(picks, len(gt) - 1)
    centers = np.array([screen.elements[int(j)].bbox.center for j in picks])
    spans = np.array(
        [
            (screen.elements[int(j)].bbox.width, screen.elements[int(j)].bbox.height)
            for j in picks
        ],
        dtype=np.float64,
    )
    intended = centers + rng.normal((cfg.gaze_points, 2)) * spans / 6.0
    intended[:, 0] = np.clip(intended[:, 0], 0.0, w - 1.0)
    intended[:, 1] = np.clip(intended[:, 1], 0.0, h - 1.0)
    raw_gaze = (intended - o) @ m_inv.T
    return GazeSession(
        calibration_raw=raw_cal, calibration_truth=truth, gaze=raw_gaze
    )


def generate_dataset(cfg: SynthConfig):
    """All screens plus (possibly empty) per-screen session lists."""
    screens = [generate_screen(cfg, i) for i in range(cfg.screen_count)]
    sessions: list[list[GazeSession]] = []
    for i, screen in enumerate(screens):
        per_screen = []
        if cfg.sessions_per_screen:
            rng = SeededRng(cfg.seed).derive(f"sessions:{i}")
            per_screen = [
                _session_for_screen(screen, cfg, rng.derive(f"s{j}"))
                for j in range(cfg.sessions_per_screen)
            ]
        sessions.append(per_screen)
    return screens, sessions


__all__ = [
    "MIN_ELEMENT_PX",
    "SynthConfig",
    "generate_dataset",
    "generate_screen",
    "saliency_rule",
]
