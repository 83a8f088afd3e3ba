"""Pluggable model backends behind one typed client.

A wire backend answers `call(endpoint, payload) -> response` in the shared
JSON formats: replayed from a fixture file, proxied over HTTP to an
inference bridge, or computed by an in-process stand-in (tests). The
`BackendClient` wraps a wire backend with typed encode/decode methods and
optionally records a per-run transcript of every call it makes.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Protocol

import numpy as np
import requests

from .errors import BackendUnavailableError, FixtureLookupError
from .geometry import BinaryMask, Heatmap
from .wire import (
    BBox,
    decode_heatmap,
    decode_image,
    decode_mask,
    encode_image,
    encode_mask,
    request_hash,
)


class WireBackend(Protocol):
    def call(self, endpoint: str, payload: dict) -> dict: ...


class FixtureStore:
    """Replays recorded responses, matched by request hash.

    Fixture files are JSON lines: {"endpoint": ..., "request_hash": ...,
    "response": ...}. Lookups are read-only and thread-safe.
    """

    def __init__(self, responses: dict[str, dict]):
        self._responses = responses

    @classmethod
    def load(cls, path: str | Path) -> "FixtureStore":
        responses: dict[str, dict] = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            doc = json.loads(line)
            responses[doc["request_hash"]] = doc["response"]
        return cls(responses)

    def call(self, endpoint: str, payload: dict) -> dict:
        h = request_hash(endpoint, payload)
        if h not in self._responses:
            raise FixtureLookupError(endpoint, h)
        return self._responses[h]


class HttpBridge:
    """Talks to an inference bridge serving POST /v1/<endpoint>."""

    def __init__(self, base_url: str, timeout: float = 120.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = requests.Session()

    def call(self, endpoint: str, payload: dict) -> dict:
        url = f"{self.base_url}/v1/{endpoint}"
        try:
            resp = self._session.post(url, json=payload, timeout=self.timeout)
        except requests.RequestException as e:
            raise BackendUnavailableError(f"{url}: {e}") from e
        if resp.status_code != 200:
            raise BackendUnavailableError(f"{url}: HTTP {resp.status_code}: {resp.text[:200]}")
        return resp.json()


class FixtureRecorder:
    """Wraps a wire backend and appends every (request hash, response) pair
    to a fixture file, deduplicating identical requests."""

    def __init__(self, inner: WireBackend):
        self.inner = inner
        self._lock = threading.Lock()
        self._lines: dict[str, str] = {}

    def call(self, endpoint: str, payload: dict) -> dict:
        response = self.inner.call(endpoint, payload)
        h = request_hash(endpoint, payload)
        line = json.dumps(
            {"endpoint": endpoint, "request_hash": h, "response": response},
            sort_keys=False, separators=(",", ":"), ensure_ascii=False,
        )
        with self._lock:
            self._lines.setdefault(h, line)
        return response

    def dump(self, path: str | Path) -> int:
        with self._lock:
            lines = list(self._lines.values())
        Path(path).write_text("".join(l + "\n" for l in lines), encoding="utf-8")
        return len(lines)


class BackendClient:
    """Typed surface over a wire backend.

    Each method encodes its arguments into the endpoint payload, performs
    the call, decodes the response, and (when transcripts are enabled)
    appends {stage, endpoint, request_hash, response} in call order.
    """

    def __init__(self, wire: WireBackend, transcript: list | None = None):
        self.wire = wire
        self.transcript = transcript
        self.stage = ""

    def _call(self, endpoint: str, payload: dict) -> dict:
        response = self.wire.call(endpoint, payload)
        if self.transcript is not None:
            self.transcript.append({
                "stage": self.stage,
                "endpoint": endpoint,
                "request_hash": request_hash(endpoint, payload),
                "response": response,
            })
        return response

    # --- endpoints ---------------------------------------------------------

    def tag(self, rgb: np.ndarray, threshold_multiplier: float, variant: str = "ram") -> list[tuple[str, float]]:
        endpoint = "tag" if variant == "ram" else f"tag?variant={variant}"
        doc = self._call(endpoint, {
            "image_b64": encode_image(rgb),
            "threshold_multiplier": threshold_multiplier,
        })
        return [(t["tag"], float(t["score"])) for t in doc["tags"]]

    def detect(self, rgb: np.ndarray, query: str, box_threshold: float) -> list[BBox]:
        doc = self._call("detect", {
            "image_b64": encode_image(rgb),
            "query": query,
            "box_threshold": box_threshold,
        })
        return [BBox.from_json(b) for b in doc["boxes"]]

    def segment(self, rgb: np.ndarray, boxes: list[BBox]) -> list[BinaryMask]:
        doc = self._call("segment", {
            "image_b64": encode_image(rgb),
            "boxes": [b.to_json() for b in boxes],
        })
        return [decode_mask(m) for m in doc["masks"]]

    def heatmap(self, rgb: np.ndarray, text: str) -> Heatmap:
        doc = self._call("heatmap", {"image_b64": encode_image(rgb), "text": text})
        out = decode_heatmap(doc)
        if (out.height, out.width) != rgb.shape[:2]:
            raise BackendUnavailableError(
                f"heatmap {out.width}x{out.height} does not match the "
                f"{rgb.shape[1]}x{rgb.shape[0]} query image"
            )
        return out

    def vqa(self, rgb: np.ndarray, question: str) -> str:
        doc = self._call("vqa", {"image_b64": encode_image(rgb), "question": question})
        return doc["answer"]

    def chat(self, messages: list[dict], temperature: float, rgb: np.ndarray | None = None) -> str:
        payload: dict = {"messages": messages, "temperature": temperature}
        if rgb is not None:
            payload["image_b64"] = encode_image(rgb)
        doc = self._call("chat", payload)
        return doc["response"]

    def embed(self, text: str) -> np.ndarray:
        doc = self._call("embed", {"texts": [text]})
        return np.asarray(doc["vectors"][0], dtype=np.float64)

    def edit(self, rgb: np.ndarray, instruction: str) -> np.ndarray:
        doc = self._call("edit", {"image_b64": encode_image(rgb), "instruction": instruction})
        return decode_image(doc["image_b64"])


def open_wire_backend(spec: str) -> WireBackend:
    """'http(s)://...' -> HTTP bridge; anything else -> fixture file path."""
    if spec.startswith("http://") or spec.startswith("https://"):
        return HttpBridge(spec)
    path = Path(spec)
    if not path.is_file():
        raise BackendUnavailableError(f"fixture file not found: {spec}")
    return FixtureStore.load(path)
