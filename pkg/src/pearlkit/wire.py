"""Wire formats shared by the fixture store, the HTTP client, and the bridge.

Every backend call is one JSON request/response pair. Fixture files key
responses by a request hash: sha256 over the canonical JSON of
{"endpoint": ..., "payload": ...} with any image payload field replaced by
a digest of its decoded pixels. Hashing decoded pixels (not PNG bytes)
keeps recorded fixtures replayable even if the PNG encoder changes.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .geometry import BinaryMask, Heatmap

ENDPOINTS = ("tag", "detect", "segment", "heatmap", "vqa", "chat", "embed", "edit")

_IMAGE_FIELDS = ("image_b64",)


def encode_image(rgb: np.ndarray) -> str:
    """8-bit RGB array -> base64 PNG string."""
    buf = io.BytesIO()
    Image.fromarray(np.asarray(rgb, dtype=np.uint8)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_image(b64: str) -> np.ndarray:
    arr = np.array(Image.open(io.BytesIO(base64.b64decode(b64))))
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=-1)
    return arr[:, :, :3].astype(np.uint8)


def encode_mask(mask: BinaryMask) -> str:
    return base64.b64encode(mask.to_png_bytes()).decode("ascii")


def decode_mask(b64: str) -> BinaryMask:
    return BinaryMask.from_png_bytes(base64.b64decode(b64))


def encode_heatmap(h: Heatmap) -> dict:
    return {
        "heatmap": base64.b64encode(h.values.astype("<f4").tobytes()).decode("ascii"),
        "width": h.width,
        "height": h.height,
    }


def decode_heatmap(doc: dict) -> Heatmap:
    raw = base64.b64decode(doc["heatmap"])
    values = np.frombuffer(raw, dtype="<f4").reshape(doc["height"], doc["width"])
    return Heatmap(values.astype(np.float64))


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _pixel_digest(image_b64: str) -> str:
    arr = decode_image(image_b64)
    h = hashlib.sha256()
    h.update(np.asarray(arr.shape, dtype="<i4").tobytes())
    h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def request_hash(endpoint: str, payload: dict) -> str:
    """Stable identity of one backend request."""
    reduced = dict(payload)
    for fld in _IMAGE_FIELDS:
        if fld in reduced and reduced[fld] is not None:
            reduced[fld] = {"pixels_sha256": _pixel_digest(reduced[fld])}
    doc = canonical_json({"endpoint": endpoint, "payload": reduced})
    return hashlib.sha256(doc.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class BBox:
    """Detector output box in pixel coordinates, [x0, x1) x [y0, y1)."""

    x0: float
    y0: float
    x1: float
    y1: float
    phrase: str
    score: float

    def area(self) -> float:
        return max(0.0, self.x1 - self.x0) * max(0.0, self.y1 - self.y0)

    def to_json(self) -> dict:
        return {
            "x0": self.x0, "y0": self.y0, "x1": self.x1, "y1": self.y1,
            "phrase": self.phrase, "score": self.score,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "BBox":
        return cls(
            x0=doc["x0"], y0=doc["y0"], x1=doc["x1"], y1=doc["y1"],
            phrase=doc["phrase"], score=doc["score"],
        )
