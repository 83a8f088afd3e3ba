"""Run manifests embedded in output artifacts.

The timestamp defaults to None so two runs with the same configuration
produce byte-identical artifacts; pass stamp=True to record wall-clock
time at the cost of reproducibility.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone

from . import __version__


@dataclass(frozen=True)
class RunManifest:
    config: dict
    dataset_digest: str | None
    backend: str  # "fixture" | "http" | "none"
    seed: int | None
    version: str
    timestamp: str | None = None

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "dataset_digest": self.dataset_digest,
            "backend": self.backend,
            "seed": self.seed,
            "version": self.version,
            "timestamp": self.timestamp,
        }


def make_manifest(
    config: dict | None = None,
    dataset_digest: str | None = None,
    backend_spec: str | None = None,
    seed: int | None = None,
    stamp: bool = False,
) -> RunManifest:
    if backend_spec is None:
        backend = "none"
    elif backend_spec.startswith("http://") or backend_spec.startswith("https://"):
        backend = "http"
    else:
        backend = "fixture"
    return RunManifest(
        config=config or {},
        dataset_digest=dataset_digest,
        backend=backend,
        seed=seed,
        version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat() if stamp else None,
    )
