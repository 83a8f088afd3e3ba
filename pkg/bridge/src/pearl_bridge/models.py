"""Model adapters behind the served endpoints.

Each builder returns a handler `fn(payload, variant) -> response dict` in
the wire format. Kinds:

- ``import``   any endpoint; dotted ``module:factory`` returning the handler
               (the operator's own wrapper around a real model)
- ``replay``   any endpoint; replays a recorded fixture file
- ``sbert``    embed; sentence-transformers checkpoint
- ``fixture``  embed; vector file {"dim": n, "vectors": {...}}
- ``openai``   chat; OpenAI-compatible REST proxy, API key from env
- ``chat-vlm`` tag; noun-list prompting through a configured chat handler
"""

from __future__ import annotations

import importlib
import json
import os
from pathlib import Path

import requests

from .hashing import request_hash


class ModelConfigError(Exception):
    """Raised at startup when a checkpoint or key cannot be resolved."""


def _build_import(endpoint: str, options: dict):
    target = options.get("target")
    if not target or ":" not in target:
        raise ModelConfigError(f"{endpoint}: import kind needs target 'module:factory'")
    module_name, _, attr = target.partition(":")
    try:
        module = importlib.import_module(module_name)
    except ImportError as e:
        raise ModelConfigError(f"{endpoint}: cannot import {module_name!r}: {e}") from e
    factory = getattr(module, attr, None)
    if factory is None:
        raise ModelConfigError(f"{endpoint}: {module_name!r} has no attribute {attr!r}")
    handler = factory(options)

    def call(payload: dict, variant: str | None = None) -> dict:
        return handler(payload) if variant is None else handler(payload, variant=variant)

    return call


def _build_replay(endpoint: str, options: dict):
    path = Path(options.get("path", ""))
    if not path.is_file():
        raise ModelConfigError(f"{endpoint}: replay fixture not found: {path}")
    responses: dict[str, dict] = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            doc = json.loads(line)
            responses[doc["request_hash"]] = doc["response"]

    def call(payload: dict, variant: str | None = None) -> dict:
        key = endpoint if variant is None else f"{endpoint}?variant={variant}"
        h = request_hash(key, payload)
        if h not in responses:
            raise KeyError(f"no recorded response for {key} hash {h}")
        return responses[h]

    return call


def _build_sbert(endpoint: str, options: dict):
    checkpoint = options.get("checkpoint")
    if not checkpoint:
        raise ModelConfigError("embed: sbert kind needs a checkpoint pin")
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as e:
        raise ModelConfigError(f"embed: sentence-transformers not installed: {e}") from e
    model = SentenceTransformer(checkpoint, device=options.get("device", "cpu"))

    def call(payload: dict, variant: str | None = None) -> dict:
        vectors = model.encode(payload["texts"], convert_to_numpy=True)
        return {
            "dim": int(vectors.shape[1]),
            "vectors": [[float(x) for x in row] for row in vectors],
        }

    return call


def _build_fixture_embed(endpoint: str, options: dict):
    path = Path(options.get("path", ""))
    if not path.is_file():
        raise ModelConfigError(f"embed: fixture vector file not found: {path}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    vectors = {k: [float(x) for x in v] for k, v in doc["vectors"].items()}
    dim = int(doc["dim"])

    def call(payload: dict, variant: str | None = None) -> dict:
        out = []
        for text in payload["texts"]:
            key = " ".join(text.strip().lower().split())
            if key not in vectors:
                raise KeyError(f"no fixture embedding for {key!r}")
            out.append(vectors[key])
        return {"dim": dim, "vectors": out}

    return call


def _build_openai_chat(endpoint: str, options: dict):
    base_url = options.get("base_url", "https://api.openai.com/v1")
    model = options.get("model")
    if not model:
        raise ModelConfigError("chat: openai kind needs a model pin")
    key_env = options.get("api_key_env", "OPENAI_API_KEY")
    api_key = os.environ.get(key_env)
    if not api_key and options.get("require_key", True):
        raise ModelConfigError(f"chat: environment variable {key_env} is not set")

    def call(payload: dict, variant: str | None = None) -> dict:
        messages = [dict(m) for m in payload["messages"]]
        if payload.get("image_b64"):
            # attach the image to the last user message, vision-API style
            for m in reversed(messages):
                if m["role"] == "user":
                    m["content"] = [
                        {"type": "text", "text": m["content"]},
                        {"type": "image_url", "image_url": {
                            "url": "data:image/png;base64," + payload["image_b64"]
                        }},
                    ]
                    break
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        resp = requests.post(
            f"{base_url.rstrip('/')}/chat/completions",
            json={"model": model, "messages": messages, "temperature": payload["temperature"]},
            headers=headers,
            timeout=options.get("timeout", 120),
        )
        resp.raise_for_status()
        return {"response": resp.json()["choices"][0]["message"]["content"]}

    return call


_TAG_PROMPT = (
    "Please provide a list of nouns (where each noun is separated by comma, "
    "example: object1, object2, object3) that could be used to describe this "
    "image. This listing should include where common indoor objects could be "
    "placed. Only list objects which are in the image."
)


def _build_chat_vlm_tag(endpoint: str, options: dict, registry=None):
    if registry is None:
        raise ModelConfigError("tag: chat-vlm kind needs a configured chat endpoint")

    def call(payload: dict, variant: str | None = None) -> dict:
        chat = registry.handler("chat")
        doc = chat({
            "messages": [{"role": "user", "content": _TAG_PROMPT}],
            "temperature": options.get("temperature", 0.2),
            "image_b64": payload["image_b64"],
        })
        tags = []
        for part in doc["response"].split(","):
            tag = part.strip().lower()
            if tag and tag not in [t["tag"] for t in tags]:
                tags.append({"tag": tag, "score": 1.0})
        return {"tags": tags}

    return call


BUILDERS = {
    "import": _build_import,
    "replay": _build_replay,
    "sbert": _build_sbert,
    "fixture": _build_fixture_embed,
    "openai": _build_openai_chat,
}

KIND_ENDPOINTS = {
    "sbert": ("embed",),
    "fixture": ("embed",),
    "openai": ("chat",),
    "chat-vlm": ("tag",),
}


def build_handler(endpoint: str, kind: str, options: dict, registry=None):
    if kind in KIND_ENDPOINTS and endpoint not in KIND_ENDPOINTS[kind]:
        raise ModelConfigError(f"{endpoint}: kind {kind!r} only serves {KIND_ENDPOINTS[kind]}")
    if kind == "chat-vlm":
        return _build_chat_vlm_tag(endpoint, options, registry=registry)
    if kind not in BUILDERS:
        raise ModelConfigError(f"{endpoint}: unknown model kind {kind!r}")
    return BUILDERS[kind](endpoint, options)
