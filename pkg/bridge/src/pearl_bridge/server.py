"""FastAPI app serving the wire contract.

POST /v1/{endpoint} for the eight backend endpoints, plus GET /v1/info
(registry with checkpoint pins) and GET /v1/health. Unconfigured endpoints
answer 501. Requests and responses are validated against the shared JSON
schemas; detector boxes are clamped into image bounds and flagged.
"""

from __future__ import annotations

import base64
import io

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse
from PIL import Image

from . import __version__
from .recording import Recorder
from .registry import ModelRegistry
from .schemas import ENDPOINTS, validate


def _image_size(image_b64: str) -> tuple[int, int]:
    with Image.open(io.BytesIO(base64.b64decode(image_b64))) as im:
        return im.width, im.height


def _clamp_boxes(response: dict, width: int, height: int) -> dict:
    clamped = False
    boxes = []
    for box in response.get("boxes", []):
        fixed = dict(box)
        fixed["x0"] = min(max(float(box["x0"]), 0.0), float(width))
        fixed["x1"] = min(max(float(box["x1"]), 0.0), float(width))
        fixed["y0"] = min(max(float(box["y0"]), 0.0), float(height))
        fixed["y1"] = min(max(float(box["y1"]), 0.0), float(height))
        if any(fixed[k] != float(box[k]) for k in ("x0", "y0", "x1", "y1")):
            clamped = True
        boxes.append(fixed)
    out = dict(response)
    out["boxes"] = boxes
    if clamped:
        out["clamped"] = True
    return out


def create_app(registry: ModelRegistry, recorder: Recorder | None = None) -> FastAPI:
    app = FastAPI(title="pearl-bridge", version=__version__)
    app.state.registry = registry
    app.state.recorder = recorder

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "endpoints": sorted(registry.entries)}

    @app.get("/v1/info")
    def info():
        doc = registry.info()
        doc["version"] = __version__
        doc["recording"] = recorder is not None
        return doc

    @app.post("/v1/{endpoint}")
    async def serve_endpoint(endpoint: str, request: Request, variant: str | None = Query(None)):
        if endpoint not in ENDPOINTS:
            return JSONResponse({"error": f"unknown endpoint {endpoint!r}"}, status_code=404)
        if not registry.serves(endpoint):
            return JSONResponse(
                {"error": f"endpoint {endpoint!r} is not configured"}, status_code=501
            )
        try:
            payload = await request.json()
        except Exception:
            return JSONResponse({"error": "body must be JSON"}, status_code=400)
        problems = validate(endpoint, "request", payload)
        if problems:
            return JSONResponse({"error": "invalid request", "detail": problems}, status_code=400)

        try:
            handler = registry.handler(endpoint)
            response = handler(payload, variant) if endpoint == "tag" else handler(payload)
        except KeyError as e:
            return JSONResponse({"error": str(e)}, status_code=404)
        except Exception as e:
            return JSONResponse({"error": f"{endpoint} backend failed: {e}"}, status_code=500)

        problems = validate(endpoint, "response", response)
        if problems:
            return JSONResponse(
                {"error": "backend produced an invalid response", "detail": problems},
                status_code=500,
            )
        if endpoint == "detect":
            # clamping a valid response keeps it valid (bounds only tighten)
            response = _clamp_boxes(response, *_image_size(payload["image_b64"]))
        if recorder is not None:
            key = endpoint if variant is None else f"{endpoint}?variant={variant}"
            recorder.add(key, payload, response)
        return JSONResponse(response)

    return app
