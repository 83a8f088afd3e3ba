"""Readers and writers for the line-oriented artifact files.

Placements and selections are JSON lines; an optional leading
{"manifest": ...} line carries run provenance and is skipped by readers.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Mapping

from .geometry import Point2D


def _data_lines(path: Path) -> Iterable[dict]:
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        if set(doc) == {"manifest"}:
            continue
        yield doc


def write_placements(
    path: str | Path,
    placements: Mapping[tuple[str, str], Point2D],
    manifest: dict | None = None,
) -> None:
    lines = []
    if manifest is not None:
        lines.append(json.dumps({"manifest": manifest}, sort_keys=True))
    for (image_id, object_name), p in sorted(placements.items()):
        lines.append(json.dumps(
            {"image": image_id, "object": object_name, "point": [int(p.x), int(p.y)]}
        ))
    Path(path).write_text("".join(l + "\n" for l in lines), encoding="utf-8")


def read_placements(path: str | Path) -> dict[tuple[str, str], Point2D]:
    out: dict[tuple[str, str], Point2D] = {}
    for doc in _data_lines(Path(path)):
        x, y = doc["point"]
        out[(doc["image"], doc["object"])] = Point2D(int(x), int(y))
    return out


def write_selections(
    path: str | Path,
    selections: Mapping[tuple[str, str], str],
    manifest: dict | None = None,
) -> None:
    lines = []
    if manifest is not None:
        lines.append(json.dumps({"manifest": manifest}, sort_keys=True))
    for (image_id, object_name), tag in sorted(selections.items()):
        lines.append(json.dumps({"image": image_id, "object": object_name, "tag": tag}))
    Path(path).write_text("".join(l + "\n" for l in lines), encoding="utf-8")


def read_selections(path: str | Path) -> dict[tuple[str, str], str]:
    return {
        (doc["image"], doc["object"]): doc["tag"] for doc in _data_lines(Path(path))
    }


def write_tags(path: str | Path, tags: Mapping[str, list[str]], manifest: dict | None = None) -> None:
    doc: dict = {"tags": {k: list(v) for k, v in sorted(tags.items())}}
    if manifest is not None:
        doc["manifest"] = manifest
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def read_tags(path: str | Path) -> dict[str, list[str]]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    mapping = doc.get("tags", doc) if isinstance(doc, dict) else doc
    return {k: list(v) for k, v in mapping.items() if k != "manifest"}


def write_audit_rows(path: str | Path, rows: Iterable[dict], manifest: dict | None = None) -> None:
    lines = []
    if manifest is not None:
        lines.append(json.dumps({"manifest": manifest}, sort_keys=True))
    for row in rows:
        lines.append(json.dumps(row))
    Path(path).write_text("".join(l + "\n" for l in lines), encoding="utf-8")
