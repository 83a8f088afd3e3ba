"""Shared wire schemas, loaded from the core package's published data files."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import jsonschema

ENDPOINTS = ("tag", "detect", "segment", "heatmap", "vqa", "chat", "embed", "edit")


@lru_cache(maxsize=None)
def load_schema(endpoint: str, side: str) -> dict:
    name = f"{endpoint}.{side}.schema.json"
    text = resources.files("pearlkit.schemas").joinpath(name).read_text(encoding="utf-8")
    return json.loads(text)


@lru_cache(maxsize=None)
def _validator(endpoint: str, side: str) -> jsonschema.Draft7Validator:
    return jsonschema.Draft7Validator(load_schema(endpoint, side))


def validate(endpoint: str, side: str, doc: dict) -> list[str]:
    """Return a list of human-readable schema violations (empty = valid)."""
    return [e.message for e in _validator(endpoint, side).iter_errors(doc)]
