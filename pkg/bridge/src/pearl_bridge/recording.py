"""Fixture recording: every served call appended as a replayable JSON line."""

from __future__ import annotations

import json
import threading
from pathlib import Path

from .hashing import request_hash


class Recorder:
    """Appends {endpoint, request_hash, response} lines, deduplicated by hash.

    Appends happen under a lock as single write calls, so concurrent request
    handling never interleaves lines.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._seen: set[str] = set()
        self.path.write_text("", encoding="utf-8")

    def add(self, endpoint: str, payload: dict, response: dict) -> str:
        h = request_hash(endpoint, payload)
        line = json.dumps(
            {"endpoint": endpoint, "request_hash": h, "response": response},
            sort_keys=False, separators=(",", ":"), ensure_ascii=False,
        )
        with self._lock:
            if h not in self._seen:
                self._seen.add(h)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
        return h

    def __len__(self) -> int:
        with self._lock:
            return len(self._seen)
