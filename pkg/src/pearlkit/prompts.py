"""Prompt template loading and message construction.

Templates are plain text assets with {object}, {tags}, {width}, {height}
placeholders; the selector's few-shot exemplars are a versioned JSON asset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from importlib import resources

from .errors import TemplateMissingPlaceholderError

_REQUIRED = {
    "selector_user": ("{object}", "{tags}"),
    "mllm_selector_user": ("{object}",),
    "direct_locator_system": ("{width}", "{height}"),
    "direct_locator_user": ("{object}",),
    "vqa_question": ("{object}",),
    "edit_instruction": ("{object}",),
}


def _asset(name: str) -> str:
    return resources.files("pearlkit.templates").joinpath(name).read_text(encoding="utf-8").rstrip("\n")


@dataclass(frozen=True)
class PromptTemplates:
    selector_system: str = field(default_factory=lambda: _asset("selector_system.txt"))
    selector_user: str = field(default_factory=lambda: _asset("selector_user.txt"))
    selector_exemplars: tuple[dict, ...] = field(
        default_factory=lambda: tuple(json.loads(_asset("selector_exemplars.json")))
    )
    mllm_tag_user: str = field(default_factory=lambda: _asset("mllm_tag_user.txt"))
    mllm_selector_system: str = field(default_factory=lambda: _asset("mllm_selector_system.txt"))
    mllm_selector_user: str = field(default_factory=lambda: _asset("mllm_selector_user.txt"))
    direct_locator_system: str = field(default_factory=lambda: _asset("direct_locator_system.txt"))
    direct_locator_user: str = field(default_factory=lambda: _asset("direct_locator_user.txt"))
    vqa_question: str = field(default_factory=lambda: _asset("vqa_question.txt"))
    edit_instruction: str = field(default_factory=lambda: _asset("edit_instruction.txt"))

    def __post_init__(self):
        for name, placeholders in _REQUIRED.items():
            text = getattr(self, name)
            for ph in placeholders:
                if ph not in text:
                    raise TemplateMissingPlaceholderError(f"template {name!r} lacks {ph}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, doc: dict) -> "PromptTemplates":
        kwargs = dict(doc)
        if "selector_exemplars" in kwargs:
            kwargs["selector_exemplars"] = tuple(kwargs["selector_exemplars"])
        return cls(**kwargs)


def build_selector_prompt(tags: list[str], object_name: str, templates: PromptTemplates) -> list[dict]:
    """System message (instructions + 3-shot exemplars) and the question.

    The answer options are the comma-joined candidate tags, in order.
    """
    if not tags:
        raise ValueError("selector prompt needs a non-empty tag list")
    shots = []
    for ex in templates.selector_exemplars:
        shots.append(
            templates.selector_user.format(object=ex["object"], tags=ex["tags"])
            + f"\nAnswer: {ex['answer']}"
        )
    system = templates.selector_system
    if shots:
        system = system + "\n\n" + "\n\n".join(shots)
    user = templates.selector_user.format(object=object_name, tags=", ".join(tags))
    return [
        {"role": "system", "content": system},
        {"role": "user", "content": user},
    ]


def build_mllm_tag_prompt(templates: PromptTemplates) -> list[dict]:
    return [{"role": "user", "content": templates.mllm_tag_user}]


def build_mllm_selector_prompt(object_name: str, templates: PromptTemplates) -> list[dict]:
    return [
        {"role": "system", "content": templates.mllm_selector_system},
        {"role": "user", "content": templates.mllm_selector_user.format(object=object_name)},
    ]


def build_direct_locator_prompt(
    object_name: str, width: int, height: int, templates: PromptTemplates,
) -> list[dict]:
    return [
        {"role": "system", "content": templates.direct_locator_system.format(width=width, height=height)},
        {"role": "user", "content": templates.direct_locator_user.format(object=object_name)},
    ]
