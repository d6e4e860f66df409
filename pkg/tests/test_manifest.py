"""Tests for manifest IO, validation, and PNG handling."""

import json

import numpy as np
import pytest
from PIL import Image

from uisal.errors import DataError
from uisal.features import BoundingBox, UiElement, UiScreen
from uisal.gaze import GazeSession
from uisal.manifest import (
    load_manifest,
    load_png,
    load_screens,
    manifest_from_screens,
    save_gray16_png,
    save_manifest,
    save_png,
    validate_manifest,
)
from uisal.rng import SeededRng


def valid_doc(**overrides):
    doc = {
        "version": 1,
        "screens": [
            {
                "id": "s0",
                "image": "images/s0.png",
                "width": 40,
                "height": 30,
                "elements": [
                    {"id": 0, "bbox": [2, 2, 20, 12]},
                    {"id": 1, "bbox": [10, 14, 38, 28]},
                ],
                "gt_element_saliency": [0.25, 0.75],
            }
        ],
    }
    doc.update(overrides)
    return doc


def make_screen(seed, sid, width=40, height=30):
    rng = SeededRng(seed)
    img = rng.uniform((height, width, 3))
    els = [
        UiElement(0, BoundingBox(2, 2, 20, 12)),
        UiElement(1, BoundingBox(10, 14, 38, 28)),
    ]
    g = rng.uniform((2,)) + 0.1
    return UiScreen(img, els, ground_truth=g / g.sum(), screen_id=sid)


# ---------------------------------------------------------------------------
# PNG round trips
# ---------------------------------------------------------------------------


def test_png_round_trip_quantizes_to_8_bit(tmp_path):
    rng = SeededRng(3)
    img = rng.uniform((12, 17, 3))
    path = tmp_path / "img.png"
    save_png(path, img)
    back = load_png(path)
    assert back.shape == img.shape
    assert back.dtype == np.float64
    # Quantization error is at most half a step of 1/255.
    assert np.max(np.abs(back - img)) <= 0.5 / 255 + 1e-12
    # A second round trip is exact: the file already holds 8-bit values.
    save_png(path, back)
    again = load_png(path)
    np.testing.assert_array_equal(back, again)


def test_png_rejects_missing_and_undecodable(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_png(tmp_path / "absent.png")
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"this is not a png")
    with pytest.raises(DataError, match="decode"):
        load_png(bad)


def test_gray16_png_is_max_normalized(tmp_path):
    density = np.zeros((6, 8))
    density[2, 3] = 0.75
    density[4, 1] = 0.25
    path = tmp_path / "map.png"
    save_gray16_png(path, density)
    with Image.open(path) as img:
        arr = np.asarray(img)
    assert arr.dtype == np.uint16
    assert arr[2, 3] == 65535
    assert arr[4, 1] == round(0.25 / 0.75 * 65535)
    assert int(arr.sum()) == int(arr[2, 3]) + int(arr[4, 1])


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def test_valid_manifest_passes():
    validate_manifest(valid_doc())


def test_rejects_wrong_version():
    with pytest.raises(DataError, match="version"):
        validate_manifest(valid_doc(version=2))


def test_rejects_duplicate_screen_ids():
    doc = valid_doc()
    doc["screens"].append(dict(doc["screens"][0]))
    with pytest.raises(DataError, match="duplicate screen id"):
        validate_manifest(doc)


def test_rejects_out_of_bounds_bbox_naming_screen():
    doc = valid_doc()
    doc["screens"][0]["elements"][1]["bbox"] = [10, 14, 41, 28]
    with pytest.raises(DataError, match="'s0'.*outside 40x30"):
        validate_manifest(doc)


def test_rejects_bad_gt_sum_naming_screen():
    doc = valid_doc()
    doc["screens"][0]["gt_element_saliency"] = [0.5, 0.6]
    with pytest.raises(DataError, match="'s0'.*sums to 1.1"):
        validate_manifest(doc)


def test_rejects_negative_gt():
    doc = valid_doc()
    doc["screens"][0]["gt_element_saliency"] = [-0.1, 1.1]
    with pytest.raises(DataError, match="negative"):
        validate_manifest(doc)


def test_rejects_duplicate_element_ids():
    doc = valid_doc()
    doc["screens"][0]["elements"][1]["id"] = 0
    with pytest.raises(DataError, match="duplicate element id 0"):
        validate_manifest(doc)


def test_rejects_mismatched_calibration_lengths():
    doc = valid_doc()
    doc["screens"][0]["sessions"] = [
        {
            "calibration": {"raw": [[1, 2], [3, 4]], "truth": [[1, 2]]},
            "gaze": [[5, 5]],
        }
    ]
    with pytest.raises(DataError, match="lengths differ"):
        validate_manifest(doc)


def test_load_rejects_invalid_json(tmp_path):
    path = tmp_path / "m.json"
    path.write_text("{not json")
    with pytest.raises(DataError, match="not valid JSON"):
        load_manifest(path)


# ---------------------------------------------------------------------------
# round trips through domain objects
# ---------------------------------------------------------------------------


def test_screens_round_trip(tmp_path):
    screens = [make_screen(1, "a"), make_screen(2, "b")]
    doc = manifest_from_screens(screens, tmp_path)
    save_manifest(tmp_path / "manifest.json", doc)
    loaded = load_screens(tmp_path / "manifest.json")
    assert [s.screen_id for s in loaded] == ["a", "b"]
    for orig, back in zip(screens, loaded):
        assert back.width == orig.width and back.height == orig.height
        assert [e.id for e in back.elements] == [e.id for e in orig.elements]
        np.testing.assert_allclose(back.ground_truth, orig.ground_truth, atol=1e-12)
        assert np.max(np.abs(back.image - orig.image)) <= 0.5 / 255 + 1e-12


def test_sessions_round_trip(tmp_path):
    screens = [make_screen(3, "s")]
    rng = SeededRng(4)
    sess = GazeSession(
        calibration_raw=rng.uniform((10, 2)) * 30,
        calibration_truth=rng.uniform((10, 2)) * 30,
        gaze=rng.uniform((25, 2)) * 30,
    )
    doc = manifest_from_screens(screens, tmp_path, sessions=[[sess]])
    save_manifest(tmp_path / "m.json", doc)
    pairs = load_screens(tmp_path / "m.json", with_sessions=True)
    (screen, sessions), = pairs
    assert len(sessions) == 1
    np.testing.assert_array_equal(sessions[0].calibration_raw, sess.calibration_raw)
    np.testing.assert_array_equal(sessions[0].calibration_truth, sess.calibration_truth)
    np.testing.assert_array_equal(sessions[0].gaze, sess.gaze)


def test_saved_manifest_is_stable_bytes(tmp_path):
    screens = [make_screen(5, "x")]
    doc = manifest_from_screens(screens, tmp_path)
    p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
    save_manifest(p1, doc)
    save_manifest(p2, load_manifest(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_image_dim_mismatch_names_screen(tmp_path):
    screens = [make_screen(6, "dims")]
    doc = manifest_from_screens(screens, tmp_path)
    doc["screens"][0]["width"] = 39
    doc["screens"][0]["elements"][1]["bbox"] = [10, 14, 38, 28]
    save_manifest(tmp_path / "m.json", doc)
    with pytest.raises(DataError, match="'dims'"):
        load_screens(tmp_path / "m.json")
