"""HTTP prediction service.

A loaded model is shared, immutably, across request handler threads; every
response is a pure function of the request body. Endpoints:

    GET  /api/health   -> {"status": "ok", "model_version": ...}
    POST /api/predict  -> {"saliency": [{"id", "value"}, ...]}
    POST /api/compare  -> per-variant saliency plus deltas against variant 0

Statuses: 400 for a malformed body or out-of-bounds bbox, 404 for unknown
paths, 422 when the image payload cannot be decoded as a PNG, 500 for a
numeric failure while predicting.
"""

from __future__ import annotations

import base64
import binascii
import io
import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
from PIL import Image, UnidentifiedImageError

from uisal.checkpoint import load_model
from uisal.errors import DataError, NumericError, ShapeError, UisalError
from uisal.features import BoundingBox, UiElement, UiScreen
from uisal.model import SaliencyModel, predict_ui

log = logging.getLogger("uisal.service")

MAX_BODY_BYTES = 32 * 1024 * 1024


class RequestError(Exception):
    """A client error carrying the HTTP status to respond with."""

    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


def _decode_image(payload: dict) -> np.ndarray:
    encoded = payload.get("image_png_base64")
    if not isinstance(encoded, str) or not encoded:
        raise RequestError(400, "image_png_base64 must be a non-empty string")
    try:
        raw = base64.b64decode(encoded, validate=True)
    except (binascii.Error, ValueError):
        raise RequestError(422, "image_png_base64 is not valid base64")
    try:
        with Image.open(io.BytesIO(raw)) as img:
            rgb = img.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError, ValueError):
        raise RequestError(422, "image bytes cannot be decoded")
    return arr


def _decode_elements(payload: dict, width: int, height: int) -> list[UiElement]:
    items = payload.get("elements")
    if not isinstance(items, list) or not items:
        raise RequestError(400, "elements must be a non-empty list")
    elements = []
    seen = set()
    for i, item in enumerate(items):
        if not isinstance(item, dict) or "id" not in item or "bbox" not in item:
            raise RequestError(400, f"element {i} needs 'id' and 'bbox'")
        eid = item["id"]
        if not isinstance(eid, (int, str)) or isinstance(eid, bool):
            raise RequestError(400, f"element {i} id must be an int or string")
        if eid in seen:
            raise RequestError(400, f"duplicate element id {eid!r}")
        seen.add(eid)
        bbox = item["bbox"]
        if (
            not isinstance(bbox, list)
            or len(bbox) != 4
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in bbox)
        ):
            raise RequestError(400, f"element {eid!r} bbox must be four integers")
        x0, y0, x1, y1 = bbox
        if not (0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height):
            raise RequestError(
                400,
                f"element {eid!r} bbox {bbox} is outside the {width}x{height} image",
            )
        elements.append(UiElement(id=eid, bbox=BoundingBox(x0, y0, x1, y1)))
    return elements


class PredictionService:
    """Pure request -> response logic, independent of HTTP plumbing."""

    def __init__(self, model: SaliencyModel, model_version: str):
        self.model = model
        self.model_version = model_version

    def health(self) -> dict:
        return {"status": "ok", "model_version": self.model_version}

    def _saliency(self, payload: dict) -> list[dict]:
        if not isinstance(payload, dict):
            raise RequestError(400, "request body must be a JSON object")
        image = _decode_image(payload)
        height, width = image.shape[:2]
        elements = _decode_elements(payload, width, height)
        screen = UiScreen(image=image, elements=elements)
        try:
            values = predict_ui(self.model, screen)
        except (NumericError, FloatingPointError) as exc:
            raise RequestError(500, f"numeric failure: {exc}")
        except (DataError, ShapeError) as exc:
            raise RequestError(400, str(exc))
        if not np.all(np.isfinite(values)):
            raise RequestError(500, "numeric failure: non-finite prediction")
        return [
            {"id": el.id, "value": float(v)} for el, v in zip(elements, values)
        ]

    def predict(self, payload: dict) -> dict:
        return {"saliency": self._saliency(payload)}

    def compare(self, payload: dict) -> dict:
        if not isinstance(payload, dict):
            raise RequestError(400, "request body must be a JSON object")
        variants = payload.get("variants")
        if not isinstance(variants, list) or not variants:
            raise RequestError(400, "variants must be a non-empty list")
        results = [self._saliency(v) for v in variants]
        base = {row["id"]: row["value"] for row in results[0]}
        out = []
        for saliency in results:
            deltas = [
                {"id": row["id"], "delta": row["value"] - base[row["id"]]}
                for row in saliency
                if row["id"] in base
            ]
            out.append({"saliency": saliency, "deltas": deltas})
        return {"variants": out}


def _make_handler(service: PredictionService):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("%s %s", self.address_string(), fmt % args)

        def _send(self, status: int, payload: dict) -> None:
            body = json.dumps(payload, sort_keys=True).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _read_body(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            if length <= 0:
                raise RequestError(400, "a JSON body is required")
            if length > MAX_BODY_BYTES:
                raise RequestError(400, "request body too large")
            raw = self.rfile.read(length)
            try:
                return json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                raise RequestError(400, "request body is not valid JSON")

        def do_GET(self):
            if self.path == "/api/health":
                self._send(200, service.health())
            else:
                self._send(404, {"error": f"unknown path {self.path}"})

        def do_POST(self):
            try:
                if self.path == "/api/predict":
                    self._send(200, service.predict(self._read_body()))
                elif self.path == "/api/compare":
                    self._send(200, service.compare(self._read_body()))
                else:
                    self._send(404, {"error": f"unknown path {self.path}"})
            except RequestError as exc:
                self._send(exc.status, {"error": str(exc)})
            except UisalError as exc:
                self._send(500, {"error": str(exc)})
            except Exception as exc:  # pragma: no cover - last resort
                log.exception("unhandled error")
                self._send(500, {"error": f"internal error: {exc}"})

    return Handler


def make_server(
    checkpoint_path, host: str = "127.0.0.1", port: int = 0
) -> ThreadingHTTPServer:
    """Builds (but does not start) a server bound to host:port."""
    model, metadata = load_model(checkpoint_path)
    version = str(metadata.get("model_version", "unknown"))
    service = PredictionService(model, version)
    return ThreadingHTTPServer((host, port), _make_handler(service))


def run_server(checkpoint_path, host: str = "127.0.0.1", port: int = 8750) -> None:
    """Loads the checkpoint and serves until interrupted."""
    server = make_server(checkpoint_path, host, port)
    log.info("serving on http://%s:%d", *server.server_address[:2])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def serve_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    """Starts serve_forever on a daemon thread (used by tests)."""
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread


__all__ = [
    "MAX_BODY_BYTES",
    "PredictionService",
    "RequestError",
    "make_server",
    "run_server",
    "serve_in_thread",
]
