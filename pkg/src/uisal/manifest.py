"""Dataset manifest: JSON schema binding screens, elements, and gaze data.

A manifest is a JSON document:

    {
      "version": 1,
      "px_per_cm": 38.0,            # optional
      "screens": [
        {
          "id": "s0",
          "image": "imgs/s0.png",   # path relative to the manifest
          "width": 360, "height": 640,
          "elements": [{"id": 0, "bbox": [x0, y0, x1, y1]}, ...],
          "gt_element_saliency": [...],          # optional, sums to 1
          "sessions": [                          # optional
            {"calibration": {"raw": [[x,y]...], "truth": [[x,y]...]},
             "gaze": [[x,y]...]}
          ]
        }
      ]
    }

Images are 8-bit RGB PNG on disk and float arrays in [0, 1] in memory.
Validation errors always name the offending screen.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from uisal.errors import DataError
from uisal.features import BoundingBox, UiElement, UiScreen
from uisal.gaze import GazeSession

MANIFEST_VERSION = 1


# ---------------------------------------------------------------------------
# image IO
# ---------------------------------------------------------------------------


def save_png(path, image: np.ndarray) -> None:
    """Writes a float image in [0, 1] (HxWx3) as 8-bit RGB PNG."""
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DataError(f"expected an HxWx3 image, got shape {arr.shape}")
    quantized = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(quantized, mode="RGB").save(path, format="PNG")


def load_png(path) -> np.ndarray:
    """Reads a PNG into a float64 HxWx3 array in [0, 1]."""
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float64) / 255.0
    except FileNotFoundError:
        raise DataError(f"image file not found: {path}")
    except (OSError, SyntaxError) as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from exc
    return arr


def save_gray16_png(path, density: np.ndarray) -> None:
    """Writes a density grid as a max-normalized 16-bit grayscale PNG."""
    d = np.asarray(density, dtype=np.float64)
    if d.ndim != 2:
        raise DataError(f"expected a 2-D density grid, got shape {d.shape}")
    peak = d.max()
    scaled = d / peak if peak > 0 else d
    out = np.clip(np.rint(scaled * 65535.0), 0, 65535).astype(np.uint16)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(out).save(path, format="PNG")


# ---------------------------------------------------------------------------
# manifest validation
# ---------------------------------------------------------------------------


def _screen_error(screen_id, msg: str) -> DataError:
    return DataError(f"screen {screen_id!r}: {msg}")


def _check_points(screen_id, name: str, pts) -> np.ndarray:
    arr = np.asarray(pts, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
        raise _screen_error(screen_id, f"{name} must be a non-empty list of [x, y] pairs")
    if not np.all(np.isfinite(arr)):
        raise _screen_error(screen_id, f"{name} contains non-finite coordinates")
    return arr


def validate_manifest(doc: dict) -> None:
    """Checks the manifest schema; raises DataError naming the bad screen."""
    if not isinstance(doc, dict):
        raise DataError("manifest must be a JSON object")
    if doc.get("version") != MANIFEST_VERSION:
        raise DataError(
            f"unsupported manifest version {doc.get('version')!r} "
            f"(expected {MANIFEST_VERSION})"
        )
    screens = doc.get("screens")
    if not isinstance(screens, list) or not screens:
        raise DataError("manifest must contain a non-empty 'screens' list")
    seen_ids = set()
    for entry in screens:
        sid = entry.get("id")
        if sid is None:
            raise DataError("every screen needs an 'id'")
        if sid in seen_ids:
            raise DataError(f"duplicate screen id {sid!r}")
        seen_ids.add(sid)
        width, height = entry.get("width"), entry.get("height")
        if not isinstance(width, int) or not isinstance(height, int) or width < 1 or height < 1:
            raise _screen_error(sid, f"invalid dims {width}x{height}")
        if not isinstance(entry.get("image"), str):
            raise _screen_error(sid, "missing image path")
        elements = entry.get("elements")
        if not isinstance(elements, list) or not elements:
            raise _screen_error(sid, "needs a non-empty 'elements' list")
        el_ids = set()
        for el in elements:
            eid = el.get("id")
            if not isinstance(eid, int):
                raise _screen_error(sid, f"element id {eid!r} must be an integer")
            if eid in el_ids:
                raise _screen_error(sid, f"duplicate element id {eid}")
            el_ids.add(eid)
            bbox = el.get("bbox")
            if not isinstance(bbox, list) or len(bbox) != 4 or not all(
                isinstance(v, int) for v in bbox
            ):
                raise _screen_error(sid, f"element {eid} bbox must be four integers")
            x0, y0, x1, y1 = bbox
            if not (0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height):
                raise _screen_error(
                    sid, f"element {eid} bbox {bbox} outside {width}x{height}"
                )
        gt = entry.get("gt_element_saliency")
        if gt is not None:
            if not isinstance(gt, list) or len(gt) != len(elements):
                raise _screen_error(
                    sid, f"gt_element_saliency length {len(gt) if isinstance(gt, list) else '?'} "
                         f"does not match {len(elements)} elements"
                )
            arr = np.asarray(gt, dtype=np.float64)
            if np.any(arr < 0):
                raise _screen_error(sid, "gt_element_saliency has negative entries")
            if abs(float(arr.sum()) - 1.0) > 1e-6:
                raise _screen_error(
                    sid, f"gt_element_saliency sums to {arr.sum():.9f}, expected 1"
                )
        sessions = entry.get("sessions")
        if sessions is not None:
            if not isinstance(sessions, list):
                raise _screen_error(sid, "'sessions' must be a list")
            for i, sess in enumerate(sessions):
                calib = sess.get("calibration")
                if not isinstance(calib, dict):
                    raise _screen_error(sid, f"session {i} lacks calibration data")
                raw = _check_points(sid, f"session {i} calibration.raw", calib.get("raw"))
                truth = _check_points(sid, f"session {i} calibration.truth", calib.get("truth"))
                if raw.shape != truth.shape:
                    raise _screen_error(
                        sid,
                        f"session {i} calibration raw/truth lengths differ "
                        f"({raw.shape[0]} vs {truth.shape[0]})",
                    )
                _check_points(sid, f"session {i} gaze", sess.get("gaze"))


def load_manifest(path) -> dict:
    """Reads and validates a manifest file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"manifest not found: {path}")
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest {path} is not valid JSON: {exc}") from exc
    validate_manifest(doc)
    return doc


def save_manifest(path, doc: dict) -> None:
    """Validates and writes a manifest with stable formatting."""
    validate_manifest(doc)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# conversion to domain objects
# ---------------------------------------------------------------------------


def screen_from_entry(entry: dict, base_dir) -> UiScreen:
    """Builds a UiScreen from one manifest entry, loading its image."""
    sid = entry["id"]
    image = load_png(Path(base_dir) / entry["image"])
    if image.shape[0] != entry["height"] or image.shape[1] != entry["width"]:
        raise _screen_error(
            sid,
            f"image is {image.shape[1]}x{image.shape[0]} but manifest says "
            f"{entry['width']}x{entry['height']}",
        )
    elements = [
        UiElement(el["id"], BoundingBox(*el["bbox"])) for el in entry["elements"]
    ]
    gt = entry.get("gt_element_saliency")
    return UiScreen(
        image,
        elements,
        ground_truth=None if gt is None else np.asarray(gt, dtype=np.float64),
        screen_id=str(sid),
    )


def sessions_from_entry(entry: dict) -> list[GazeSession]:
    """Extracts the gaze sessions recorded for one manifest entry."""
    out = []
    for sess in entry.get("sessions") or []:
        out.append(
            GazeSession(
                calibration_raw=np.asarray(sess["calibration"]["raw"], dtype=np.float64),
                calibration_truth=np.asarray(sess["calibration"]["truth"], dtype=np.float64),
                gaze=np.asarray(sess["gaze"], dtype=np.float64),
            )
        )
    return out


def load_screens(path, with_sessions: bool = False):
    """Loads all screens (and optionally their sessions) from a manifest.

    Returns a list of UiScreen, or a list of (UiScreen, [GazeSession])
    pairs when with_sessions is set.
    """
    path = Path(path)
    doc = load_manifest(path)
    base = path.parent
    screens = []
    for entry in doc["screens"]:
        screen = screen_from_entry(entry, base)
        if with_sessions:
            screens.append((screen, sessions_from_entry(entry)))
        else:
            screens.append(screen)
    return screens


def manifest_from_screens(
    screens: Sequence[UiScreen],
    out_dir,
    image_subdir: str = "images",
    px_per_cm: float | None = None,
    sessions: Sequence[list[GazeSession]] | None = None,
) -> dict:
    """Writes screen images under out_dir and returns the manifest document."""
    out_dir = Path(out_dir)
    entries = []
    for i, screen in enumerate(screens):
        sid = screen.screen_id if screen.screen_id is not None else f"s{i}"
        rel = f"{image_subdir}/{sid}.png"
        save_png(out_dir / rel, screen.image)
        entry = {
            "id": sid,
            "image": rel,
            "width": screen.width,
            "height": screen.height,
            "elements": [
                {"id": el.id, "bbox": [el.bbox.x0, el.bbox.y0, el.bbox.x1, el.bbox.y1]}
                for el in screen.elements
            ],
        }
        if screen.ground_truth is not None:
            entry["gt_element_saliency"] = [float(v) for v in screen.ground_truth]
        if sessions is not None and sessions[i]:
            entry["sessions"] = [
                {
                    "calibration": {
                        "raw": [[float(x), float(y)] for x, y in s.calibration_raw],
                        "truth": [[float(x), float(y)] for x, y in s.calibration_truth],
                    },
                    "gaze": [[float(x), float(y)] for x, y in s.gaze],
                }
                for s in sessions[i]
            ]
        entries.append(entry)
    doc = {"version": MANIFEST_VERSION, "screens": entries}
    if px_per_cm is not None:
        doc["px_per_cm"] = float(px_per_cm)
    return doc


__all__ = [
    "MANIFEST_VERSION",
    "load_manifest",
    "load_png",
    "load_screens",
    "manifest_from_screens",
    "save_gray16_png",
    "save_manifest",
    "save_png",
    "screen_from_entry",
    "sessions_from_entry",
    "validate_manifest",
]
