"""Three-stage placement pipeline over pluggable backends.

Stage 1 tags the image (image-level tagger, region-caption tagger, or a
multimodal chat model) and optionally filters the tags; stage 2 selects the
surface to place on; stage 3 turns the selection into a pixel coordinate.
Every backend call a run makes is captured, in order, in the returned
record's transcript, so runs against fixtures are byte-reproducible.
"""

from __future__ import annotations

import json
import re
import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .backends import BackendClient, WireBackend
from .errors import (
    EditorDimensionChangeError,
    EmptyAfterParseError,
    EmptyTagListError,
    NoBoxFoundError,
    NoCoordinateInResponseError,
    NonPositiveDepthError,
    PearlkitError,
    PipelineStageError,
    SelectionNotInTagsError,
)
from .geometry import Point2D, Point3D, argmax_point, bottommost_point, innermost_point, mask_union
from .prompts import (
    PromptTemplates,
    build_direct_locator_prompt,
    build_mllm_selector_prompt,
    build_mllm_tag_prompt,
    build_selector_prompt,
)
from .scene_data import SceneImage

TAGGERS = ("ram", "scp", "mllm")
FILTERS = ("vqa", "heatmap-topk", "detector")
SELECTORS = ("llm", "mllm")
LOCATORS = ("heatmap-max", "mask-center", "edit-bottom", "direct-mllm")

# Locators that consume the object name directly, with no tagging/selection.
_DIRECT_LOCATORS = ("edit-bottom", "direct-mllm")


@dataclass(frozen=True)
class FilterConfig:
    kind: str                    # vqa | heatmap-topk | detector
    k: int = 20                  # heatmap-topk: tags kept
    t: float = 0.25              # detector: box threshold
    area_cap: float = 0.9        # detector: drop boxes covering more than this image fraction

    def __post_init__(self):
        if self.kind not in FILTERS:
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.k < 1:
            raise ValueError("filter k must be >= 1")
        if not (0.0 < self.t < 1.0):
            raise ValueError("filter t must lie in (0, 1)")
        if not (0.0 < self.area_cap <= 1.0):
            raise ValueError("area cap must lie in (0, 1]")


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")


@dataclass(frozen=True)
class PipelineConfig:
    tagger: str | None = "ram"
    tagger_threshold_multiplier: float = 1.0
    filter: FilterConfig | None = None
    selector: str = "llm"
    temperature: float = 0.2
    locator: str = "mask-center"
    box_threshold: float = 0.25       # detector threshold used by locators
    templates: PromptTemplates = field(default_factory=PromptTemplates)
    seed: int = 0

    def __post_init__(self):
        if self.tagger is not None and self.tagger not in TAGGERS:
            raise ValueError(f"unknown tagger {self.tagger!r}")
        if self.selector not in SELECTORS:
            raise ValueError(f"unknown selector {self.selector!r}")
        if self.locator not in LOCATORS:
            raise ValueError(f"unknown locator {self.locator!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def to_dict(self) -> dict:
        doc = {
            "tagger": self.tagger,
            "tagger_threshold_multiplier": self.tagger_threshold_multiplier,
            "filter": None,
            "selector": self.selector,
            "temperature": self.temperature,
            "locator": self.locator,
            "box_threshold": self.box_threshold,
            "seed": self.seed,
            "templates": self.templates.to_dict(),
        }
        if self.filter is not None:
            doc["filter"] = {
                "kind": self.filter.kind, "k": self.filter.k,
                "t": self.filter.t, "area_cap": self.filter.area_cap,
            }
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        kwargs = dict(doc)
        if kwargs.get("filter"):
            kwargs["filter"] = FilterConfig(**kwargs["filter"])
        if "templates" in kwargs:
            kwargs["templates"] = PromptTemplates.from_dict(kwargs["templates"])
        return cls(**kwargs)


# Presets for the two named pipelines: the image-level tagger at 0.8x the
# default threshold with a detector filter feeding an LLM selector and the
# segmentation-center locator, and the region-caption pipeline with a VQA
# filter and the heatmap-peak locator.
def preset(name: str) -> PipelineConfig:
    if name == "octo-plus":
        return PipelineConfig(
            tagger="ram", tagger_threshold_multiplier=0.8,
            filter=FilterConfig(kind="detector", t=0.25),
            selector="llm", temperature=0.2,
            locator="mask-center", box_threshold=0.25,
        )
    if name == "octopus":
        return PipelineConfig(
            tagger="scp", tagger_threshold_multiplier=1.0,
            filter=FilterConfig(kind="vqa"),
            selector="llm", temperature=0.2,
            locator="heatmap-max",
        )
    raise ValueError(f"unknown preset {name!r}")


PRESET_NAMES = ("octo-plus", "octopus")


@dataclass
class PlacementRecord:
    image_id: str
    object_name: str
    tags_pre_filter: list[str] | None
    tags_post_filter: list[str] | None
    selected_tag: str | None
    point2d: Point2D
    point3d: Point3D | None
    flags: list[str]
    transcript: list[dict]

    def to_dict(self) -> dict:
        return {
            "image": self.image_id,
            "object": self.object_name,
            "tags_pre_filter": self.tags_pre_filter,
            "tags_post_filter": self.tags_post_filter,
            "selected_tag": self.selected_tag,
            "point2d": [int(self.point2d.x), int(self.point2d.y)],
            "point3d": list(self.point3d) if self.point3d is not None else None,
            "flags": self.flags,
            "transcript": self.transcript,
        }

    def to_json_bytes(self) -> bytes:
        return (json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n").encode("utf-8")


# --- stage 1: tagging and filtering -----------------------------------------

def parse_tag_list(response: str) -> list[str]:
    """Comma-separated nouns -> deduplicated lowercase tags."""
    tags = []
    for part in response.split(","):
        tag = part.strip().lower()
        if tag and tag not in tags:
            tags.append(tag)
    if not tags:
        raise EmptyAfterParseError(f"no tags parsed from {response!r}")
    return tags


def run_stage1_tag(image: SceneImage, cfg: PipelineConfig, be: BackendClient) -> list[str]:
    """Deduplicated lowercase tags, ordered by descending backend confidence."""
    if cfg.tagger == "mllm":
        response = be.chat(build_mllm_tag_prompt(cfg.templates), cfg.temperature, rgb=image.rgb)
        tags = parse_tag_list(response)
    else:
        scored = be.tag(image.rgb, cfg.tagger_threshold_multiplier, variant=cfg.tagger)
        ranked = sorted(enumerate(scored), key=lambda it: (-it[1][1], it[0]))
        tags = []
        for _, (tag, _score) in ranked:
            tag = tag.strip().lower()
            if tag and tag not in tags:
                tags.append(tag)
    if not tags:
        raise EmptyTagListError(f"tagger produced no tags for image {image.id!r}")
    return tags


def filter_vqa(tags: list[str], image: SceneImage, be: BackendClient, templates: PromptTemplates) -> list[str]:
    """Keep a tag iff the VQA backend answers yes to its presence."""
    kept = []
    for tag in tags:
        answer = be.vqa(image.rgb, templates.vqa_question.format(object=tag))
        if answer.strip().lower().strip(string.punctuation) == "yes":
            kept.append(tag)
    return kept


def filter_heatmap_topk(tags: list[str], image: SceneImage, be: BackendClient, k: int) -> list[str]:
    """Keep the k tags with the brightest heatmap peak, re-ranked descending;
    ties fall back to input order."""
    peaks = [float(be.heatmap(image.rgb, tag).values.max()) for tag in tags]
    order = sorted(range(len(tags)), key=lambda i: (-peaks[i], i))
    return [tags[i] for i in order[: min(k, len(tags))]]


def filter_detector(
    tags: list[str], image: SceneImage, be: BackendClient, t: float, cap: float = 0.9,
) -> list[str]:
    """Keep tags grounded by a detector box.

    One query joins all tags; boxes covering more than `cap` of the image
    are discarded (they ground generic whole-scene words). A tag survives
    iff its tokens appear contiguously in some surviving box phrase.
    """
    boxes = be.detect(image.rgb, ", ".join(tags), t)
    image_area = float(image.width * image.height)
    surviving = [b for b in boxes if b.area() / image_area <= cap]
    phrases = [tuple(b.phrase.strip().lower().split()) for b in surviving]

    def grounded(tag: str) -> bool:
        want = tuple(tag.split())
        n = len(want)
        for toks in phrases:
            for i in range(len(toks) - n + 1):
                if toks[i:i + n] == want:
                    return True
        return False

    return [tag for tag in tags if grounded(tag)]


def apply_filter(tags: list[str], image: SceneImage, cfg: PipelineConfig, be: BackendClient) -> list[str]:
    fc = cfg.filter
    if fc is None:
        return list(tags)
    if fc.kind == "vqa":
        return filter_vqa(tags, image, be, cfg.templates)
    if fc.kind == "heatmap-topk":
        return filter_heatmap_topk(tags, image, be, fc.k)
    return filter_detector(tags, image, be, fc.t, fc.area_cap)


# --- stage 2: selection ------------------------------------------------------

def _normalize_answer(s: str) -> str:
    return s.strip().strip(string.punctuation + "\"'").strip().lower()


def run_stage2_select(
    tags: list[str], object_name: str, be: BackendClient, cfg: PipelineConfig,
) -> str:
    """Chat selection constrained to the offered tags; one corrective retry."""
    if not tags:
        raise EmptyTagListError("selector needs a non-empty tag list")
    messages = build_selector_prompt(tags, object_name, cfg.templates)
    by_norm = {_normalize_answer(t): t for t in tags}
    answer = be.chat(messages, cfg.temperature)
    hit = by_norm.get(_normalize_answer(answer))
    if hit is not None:
        return hit
    retry = messages + [
        {"role": "assistant", "content": answer},
        {
            "role": "user",
            "content": (
                "That is not one of the possible answers. Respond with exactly one "
                "of: " + ", ".join(tags)
            ),
        },
    ]
    answer = be.chat(retry, cfg.temperature)
    hit = by_norm.get(_normalize_answer(answer))
    if hit is None:
        raise SelectionNotInTagsError(
            f"selection {answer!r} not among tags {tags} after retry"
        )
    return hit


def run_stage2_mllm(image: SceneImage, object_name: str, be: BackendClient, cfg: PipelineConfig) -> str:
    """Image-grounded selection: the answer names a surface, unconstrained."""
    messages = build_mllm_selector_prompt(object_name, cfg.templates)
    return _normalize_answer(be.chat(messages, cfg.temperature, rgb=image.rgb))


# --- stage 3: locating -------------------------------------------------------

def locate_heatmap_max(image: SceneImage, tag: str, be: BackendClient) -> Point2D:
    if not tag:
        raise EmptyTagListError("locator needs a non-empty tag")
    return argmax_point(be.heatmap(image.rgb, tag))


def locate_mask_center(image: SceneImage, tag: str, be: BackendClient, t: float) -> Point2D:
    """Detector boxes -> segmentation masks -> deepest interior point of the union."""
    if not tag:
        raise EmptyTagListError("locator needs a non-empty tag")
    boxes = be.detect(image.rgb, tag, t)
    if not boxes:
        raise NoBoxFoundError(f"detector found no box for {tag!r}")
    return innermost_point(mask_union(be.segment(image.rgb, boxes)))


def locate_edit_bottom(
    image: SceneImage, object_name: str, be: BackendClient, t: float,
    templates: PromptTemplates | None = None,
) -> Point2D:
    """Edit the object into the image, then take the bottom of its mask."""
    templates = templates or PromptTemplates()
    edited = be.edit(image.rgb, templates.edit_instruction.format(object=object_name))
    if edited.shape[:2] != image.rgb.shape[:2]:
        raise EditorDimensionChangeError(
            f"editor changed dimensions {image.rgb.shape[:2]} -> {edited.shape[:2]}"
        )
    boxes = be.detect(edited, object_name, t)
    if not boxes:
        raise NoBoxFoundError(f"detector found no box for {object_name!r} in edited image")
    return bottommost_point(mask_union(be.segment(edited, boxes)))


_COORD_RE = re.compile(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)")


def parse_coordinate_response(response: str) -> Point2D:
    """Last "(x, y)" integer pair in the response."""
    matches = _COORD_RE.findall(response)
    if not matches:
        raise NoCoordinateInResponseError(f"no (x, y) pair in {response!r}")
    x, y = matches[-1]
    return Point2D(int(x), int(y))


def locate_direct_mllm(
    image: SceneImage, object_name: str, be: BackendClient, cfg: PipelineConfig,
) -> tuple[Point2D, bool]:
    """Ask a multimodal chat model for the pixel directly.

    Returns (point, clamped); out-of-bounds answers are clamped to the grid.
    """
    messages = build_direct_locator_prompt(object_name, image.width, image.height, cfg.templates)
    response = be.chat(messages, cfg.temperature, rgb=image.rgb)
    p = parse_coordinate_response(response)
    clamped = Point2D(
        min(max(p.x, 0), image.width - 1),
        min(max(p.y, 0), image.height - 1),
    )
    return clamped, clamped != p


def backproject(p: Point2D, depth_mm: float, intrinsics: CameraIntrinsics) -> Point3D:
    """Pinhole back-projection of a pixel and its depth to camera space (meters)."""
    if depth_mm <= 0:
        raise NonPositiveDepthError(f"depth must be positive, got {depth_mm}")
    z = depth_mm / 1000.0
    return Point3D(
        (p.x - intrinsics.cx) * z / intrinsics.fx,
        (p.y - intrinsics.cy) * z / intrinsics.fy,
        z,
    )


# --- full pipeline -----------------------------------------------------------

def _run_stage(name: str, client: BackendClient, fn):
    client.stage = name
    try:
        return fn()
    except PipelineStageError:
        raise
    except PearlkitError as e:
        raise PipelineStageError(name, e) from e


def run_pipeline(
    image: SceneImage,
    object_name: str,
    cfg: PipelineConfig,
    wire: WireBackend,
    intrinsics: CameraIntrinsics | None = None,
) -> PlacementRecord:
    """Run the configured stages for one (image, object) pair.

    Raises PipelineStageError naming the failing stage on any stage error.
    """
    if not object_name or not object_name.strip():
        raise ValueError("object name must be non-empty")
    transcript: list[dict] = []
    client = BackendClient(wire, transcript=transcript)
    flags: list[str] = []

    tags_pre: list[str] | None = None
    tags_post: list[str] | None = None
    selected: str | None = None

    if cfg.locator not in _DIRECT_LOCATORS:
        if cfg.selector == "llm":
            tags_pre = _run_stage("stage1-tag", client, lambda: run_stage1_tag(image, cfg, client))

            def _filter():
                kept = apply_filter(tags_pre, image, cfg, client)
                if not kept:
                    raise EmptyTagListError("filtering removed every tag")
                return kept

            tags_post = _run_stage("stage1-filter", client, _filter)
            selected = _run_stage(
                "stage2-select", client,
                lambda: run_stage2_select(tags_post, object_name, client, cfg),
            )
        else:
            selected = _run_stage(
                "stage2-select", client,
                lambda: run_stage2_mllm(image, object_name, client, cfg),
            )

    def _locate():
        if cfg.locator == "heatmap-max":
            return locate_heatmap_max(image, selected, client), False
        if cfg.locator == "mask-center":
            return locate_mask_center(image, selected, client, cfg.box_threshold), False
        if cfg.locator == "edit-bottom":
            return locate_edit_bottom(image, object_name, client, cfg.box_threshold, cfg.templates), False
        return locate_direct_mllm(image, object_name, client, cfg)

    point, clamped = _run_stage("stage3-locate", client, _locate)
    if clamped:
        flags.append("coordinate_clamped")

    point3d = None
    if intrinsics is not None and image.depth is not None:
        depth_mm = float(image.depth[point.y, point.x])
        if depth_mm > 0:
            point3d = backproject(point, depth_mm, intrinsics)
        else:
            flags.append("no_depth_at_point")

    return PlacementRecord(
        image_id=image.id,
        object_name=object_name,
        tags_pre_filter=tags_pre,
        tags_post_filter=tags_post,
        selected_tag=selected,
        point2d=point,
        point3d=point3d,
        flags=flags,
        transcript=transcript,
    )


def run_many(
    pairs: Sequence[tuple[SceneImage, str]],
    cfg: PipelineConfig,
    wire: WireBackend,
    jobs: int = 1,
    intrinsics: CameraIntrinsics | None = None,
) -> list[PlacementRecord]:
    """Run the pipeline for many pairs; output order is always (image, object)."""
    ordered = sorted(range(len(pairs)), key=lambda i: (pairs[i][0].id, pairs[i][1]))

    def one(i: int) -> PlacementRecord:
        image, obj = pairs[i]
        return run_pipeline(image, obj, cfg, wire, intrinsics=intrinsics)

    if jobs <= 1:
        return [one(i) for i in ordered]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, ordered))
