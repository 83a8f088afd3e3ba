"""Endpoint-to-model registry with lazy, load-once semantics."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .models import ModelConfigError, build_handler
from .schemas import ENDPOINTS


@dataclass
class EndpointEntry:
    endpoint: str
    kind: str
    options: dict
    checkpoint: str | None = None
    device: str = "cpu"
    _handler: object = field(default=None, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def loaded(self) -> bool:
        return self._handler is not None

    def load(self, registry: "ModelRegistry"):
        with self._lock:
            if self._handler is None:
                self._handler = build_handler(
                    self.endpoint, self.kind, self.options, registry=registry
                )
        return self._handler


class ModelRegistry:
    """Configured endpoints, their checkpoint pins, and load state."""

    def __init__(self, entries: dict[str, EndpointEntry]):
        self.entries = entries

    @classmethod
    def from_config(cls, config: dict) -> "ModelRegistry":
        entries: dict[str, EndpointEntry] = {}
        for endpoint, spec in config.get("endpoints", {}).items():
            if endpoint not in ENDPOINTS:
                raise ModelConfigError(f"unknown endpoint {endpoint!r}")
            spec = dict(spec)
            kind = spec.pop("kind", None)
            if not kind:
                raise ModelConfigError(f"{endpoint}: missing model kind")
            entries[endpoint] = EndpointEntry(
                endpoint=endpoint,
                kind=kind,
                checkpoint=spec.get("checkpoint") or spec.get("path") or spec.get("model"),
                device=spec.get("device", "cpu"),
                options=spec,
            )
        return cls(entries)

    def startup_check(self, eager: bool = False) -> None:
        """Fail fast with one message per unresolvable endpoint.

        Cheap resolvability checks always run (files, env keys, imports);
        `eager=True` additionally loads every model now.
        """
        problems: list[str] = []
        for endpoint, entry in sorted(self.entries.items()):
            try:
                if eager or entry.kind in ("replay", "fixture", "import"):
                    entry.load(self)
            except ModelConfigError as e:
                problems.append(str(e))
            except Exception as e:  # loader blew up resolving the checkpoint
                problems.append(f"{endpoint}: {e}")
        if problems:
            raise ModelConfigError(
                "cannot serve, unresolved endpoints:\n  " + "\n  ".join(problems)
            )

    def serves(self, endpoint: str) -> bool:
        return endpoint in self.entries

    def handler(self, endpoint: str):
        if endpoint not in self.entries:
            raise KeyError(endpoint)
        return self.entries[endpoint].load(self)

    def info(self) -> dict:
        return {
            "endpoints": {
                name: {
                    "kind": e.kind,
                    "checkpoint": e.checkpoint,
                    "device": e.device,
                    "loaded": e.loaded,
                }
                for name, e in sorted(self.entries.items())
            }
        }
