"""Request hashing per the fixture-file contract.

A request's identity is sha256 over the canonical JSON (sorted keys,
compact separators) of {"endpoint": ..., "payload": ...}, where any
`image_b64` payload field is replaced by {"pixels_sha256": <sha256 of the
decoded pixel array's shape and raw bytes>}. Hashing decoded pixels keeps
fixtures replayable across PNG encoder versions.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json

import numpy as np
from PIL import Image

_IMAGE_FIELDS = ("image_b64",)


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def pixel_digest(image_b64: str) -> str:
    arr = np.array(Image.open(io.BytesIO(base64.b64decode(image_b64))))
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=-1)
    arr = arr[:, :, :3].astype(np.uint8)
    h = hashlib.sha256()
    h.update(np.asarray(arr.shape, dtype="<i4").tobytes())
    h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def request_hash(endpoint: str, payload: dict) -> str:
    reduced = dict(payload)
    for fld in _IMAGE_FIELDS:
        if fld in reduced and reduced[fld] is not None:
            reduced[fld] = {"pixels_sha256": pixel_digest(reduced[fld])}
    doc = canonical_json({"endpoint": endpoint, "payload": reduced})
    return hashlib.sha256(doc.encode("utf-8")).hexdigest()
