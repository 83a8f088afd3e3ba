"""Benchmark dataset loading, label remapping, and baseline placements.

Layout of a dataset root:

    images/<id>.png       8-bit RGB
    depth/<id>.png        optional, 16-bit single channel, millimeters
    masks/<id>.png        16-bit single channel, pixel value = label id
    labelmap.tsv          lines "id<TAB>name"
    remap.json            {"rules": {"source": "target", ...}}
    annotations.json      {"objects": [...], "images": {id: {object: {...}}}}
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    DimensionMismatchError,
    MalformedAnnotationError,
    MissingAnnotationPointError,
    MissingFileError,
    UnknownLabelIdError,
)
from .geometry import BinaryMask, Point2D

MAX_LABEL_ID = 895  # label ids live in [0, 895]; 0 is reserved for "unlabeled"

# Default object list; datasets override it via annotations.json "objects".
DEFAULT_OBJECTS = (
    "apple", "cake", "cup", "plate", "vase", "stool", "painting", "lamp",
    "book", "bag", "computer", "pencil", "shoes", "cushion", "cat",
)


@dataclass(frozen=True)
class SceneImage:
    id: str
    rgb: np.ndarray                 # (H, W, 3) uint8
    depth: np.ndarray | None = None  # (H, W) uint16, millimeters

    def __post_init__(self):
        rgb = np.asarray(self.rgb, dtype=np.uint8)
        if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.shape[0] < 1 or rgb.shape[1] < 1:
            raise DimensionMismatchError(f"image {self.id!r}: bad rgb shape {rgb.shape}")
        rgb.flags.writeable = False
        object.__setattr__(self, "rgb", rgb)
        if self.depth is not None:
            depth = np.asarray(self.depth, dtype=np.uint16)
            if depth.shape != rgb.shape[:2]:
                raise DimensionMismatchError(
                    f"image {self.id!r}: depth {depth.shape} != rgb {rgb.shape[:2]}"
                )
            depth.flags.writeable = False
            object.__setattr__(self, "depth", depth)

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    @property
    def height(self) -> int:
        return self.rgb.shape[0]


@dataclass(frozen=True)
class LabelMask:
    labels: np.ndarray  # (H, W) integer label ids

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2 or labels.size == 0:
            raise DimensionMismatchError(f"label mask must be 2D non-empty, got {labels.shape}")
        labels = labels.astype(np.int32)
        if labels.min() < 0 or labels.max() > MAX_LABEL_ID:
            raise UnknownLabelIdError(
                f"label ids must lie in [0, {MAX_LABEL_ID}], got "
                f"[{labels.min()}, {labels.max()}]"
            )
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class LabelMap:
    entries: dict[int, str]

    def __post_init__(self):
        for label_id, name in self.entries.items():
            if not isinstance(label_id, int) or label_id < 0 or label_id > MAX_LABEL_ID:
                raise MalformedAnnotationError(f"label id {label_id!r} out of range")
            if not name or name != name.strip().lower():
                raise MalformedAnnotationError(
                    f"label name {name!r} must be non-empty, lowercase, trimmed"
                )
        object.__setattr__(self, "entries", dict(self.entries))


@dataclass(frozen=True)
class RemapTable:
    rules: dict[str, str]

    def __post_init__(self):
        sources = set(self.rules)
        for src, dst in self.rules.items():
            if dst in sources:
                raise MalformedAnnotationError(
                    f"remap target {dst!r} also appears as a source (rule chain)"
                )
            if src != src.strip().lower() or dst != dst.strip().lower():
                raise MalformedAnnotationError(f"remap rule {src!r} -> {dst!r} must be lowercase")
        object.__setattr__(self, "rules", dict(self.rules))


def apply_remap(name: str, table: RemapTable) -> str:
    """Map a label name through the remap rules; unmatched names pass through."""
    return table.rules.get(name, name)


@dataclass(frozen=True)
class ObjectAnnotation:
    object_name: str
    natural: Point2D | None
    unnatural: Point2D | None
    valid_locations: tuple[str, ...]
    excluded: bool = False


@dataclass(frozen=True)
class AnnotationSet:
    objects: tuple[str, ...]
    images: dict[str, tuple[ObjectAnnotation, ...]]


@dataclass(frozen=True)
class EvaluablePair:
    """One (image, object) pair with its consolidated valid-location mask."""

    image_id: str
    object_name: str
    mask: BinaryMask


@dataclass(frozen=True)
class DatasetIndex:
    root: Path
    images: dict[str, SceneImage]
    masks: dict[str, LabelMask]
    label_map: LabelMap
    remap: RemapTable
    annotations: AnnotationSet

    @property
    def image_ids(self) -> list[str]:
        return sorted(self.images)


@dataclass(frozen=True)
class DatasetConfig:
    images_dir: str = "images"
    depth_dir: str = "depth"
    masks_dir: str = "masks"
    labelmap_file: str = "labelmap.tsv"
    remap_file: str = "remap.json"
    annotations_file: str = "annotations.json"


def _read_image(path: Path) -> np.ndarray:
    if not path.is_file():
        raise MissingFileError(str(path))
    return np.array(Image.open(path))


def _parse_labelmap(path: Path) -> LabelMap:
    if not path.is_file():
        raise MissingFileError(str(path))
    entries: dict[int, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise MalformedAnnotationError(f"{path}:{lineno}: expected 'id<TAB>name'")
        label_id = int(parts[0])
        if label_id in entries:
            raise MalformedAnnotationError(f"{path}:{lineno}: duplicate label id {label_id}")
        entries[label_id] = parts[1]
    return LabelMap(entries)


def _parse_point(raw, image_id: str, obj: str, width: int, height: int) -> Point2D | None:
    if raw is None:
        return None
    if (not isinstance(raw, (list, tuple))) or len(raw) != 2:
        raise MalformedAnnotationError(f"{image_id}/{obj}: point must be [x, y], got {raw!r}")
    x, y = int(raw[0]), int(raw[1])
    if not (0 <= x < width and 0 <= y < height):
        raise MalformedAnnotationError(
            f"{image_id}/{obj}: point ({x}, {y}) outside {width}x{height} image"
        )
    return Point2D(x, y)


def _parse_annotations(path: Path, dims: dict[str, tuple[int, int]]) -> AnnotationSet:
    if not path.is_file():
        raise MissingFileError(str(path))
    doc = json.loads(path.read_text(encoding="utf-8"))
    objects = tuple(doc.get("objects", DEFAULT_OBJECTS))
    images: dict[str, tuple[ObjectAnnotation, ...]] = {}
    for image_id, per_object in doc.get("images", {}).items():
        if image_id not in dims:
            raise MalformedAnnotationError(f"annotation references unknown image {image_id!r}")
        width, height = dims[image_id]
        anns = []
        for obj, entry in per_object.items():
            if obj not in objects:
                raise MalformedAnnotationError(
                    f"{image_id}: object {obj!r} not in configured object list"
                )
            excluded = bool(entry.get("excluded", False))
            valid = tuple(str(v).strip().lower() for v in entry.get("valid_locations", []))
            if not valid and not excluded:
                raise MalformedAnnotationError(
                    f"{image_id}/{obj}: valid_locations empty for a non-excluded pair"
                )
            anns.append(ObjectAnnotation(
                object_name=obj,
                natural=_parse_point(entry.get("natural"), image_id, obj, width, height),
                unnatural=_parse_point(entry.get("unnatural"), image_id, obj, width, height),
                valid_locations=valid,
                excluded=excluded,
            ))
        images[image_id] = tuple(anns)
    return AnnotationSet(objects=objects, images=images)


def load_dataset(root: str | Path, config: DatasetConfig | None = None) -> DatasetIndex:
    """Load and validate a dataset directory into an immutable index.

    Image ids are taken from annotations.json; every referenced image must
    have an RGB file and a label mask of matching dimensions, and every
    nonzero mask id must appear in the label map.
    """
    root = Path(root)
    cfg = config or DatasetConfig()
    if not root.is_dir():
        raise MissingFileError(str(root))

    label_map = _parse_labelmap(root / cfg.labelmap_file)

    remap_path = root / cfg.remap_file
    if not remap_path.is_file():
        raise MissingFileError(str(remap_path))
    remap = RemapTable(json.loads(remap_path.read_text(encoding="utf-8")).get("rules", {}))

    ann_path = root / cfg.annotations_file
    if not ann_path.is_file():
        raise MissingFileError(str(ann_path))
    image_ids = sorted(json.loads(ann_path.read_text(encoding="utf-8")).get("images", {}))

    images: dict[str, SceneImage] = {}
    masks: dict[str, LabelMask] = {}
    for image_id in image_ids:
        rgb = _read_image(root / cfg.images_dir / f"{image_id}.png")
        depth_path = root / cfg.depth_dir / f"{image_id}.png"
        depth = np.array(Image.open(depth_path)) if depth_path.is_file() else None
        image = SceneImage(id=image_id, rgb=rgb, depth=depth)

        mask = LabelMask(_read_image(root / cfg.masks_dir / f"{image_id}.png"))
        if (mask.height, mask.width) != (image.height, image.width):
            raise DimensionMismatchError(
                f"{image_id}: mask {mask.width}x{mask.height} != "
                f"image {image.width}x{image.height}"
            )
        present = np.unique(mask.labels)
        unknown = [int(i) for i in present if i != 0 and int(i) not in label_map.entries]
        if unknown:
            raise UnknownLabelIdError(f"{image_id}: mask ids {unknown} absent from label map")
        images[image_id] = image
        masks[image_id] = mask

    dims = {i: (images[i].width, images[i].height) for i in image_ids}
    annotations = _parse_annotations(ann_path, dims)
    return DatasetIndex(
        root=root, images=images, masks=masks,
        label_map=label_map, remap=remap, annotations=annotations,
    )


def consolidate_mask(
    mask: LabelMask, label_map: LabelMap, table: RemapTable, valid: list[str] | tuple[str, ...],
) -> BinaryMask:
    """Union of all label regions whose remapped name is a valid location."""
    valid_set = {v.strip().lower() for v in valid}
    lut = np.zeros(MAX_LABEL_ID + 1, dtype=bool)
    for label_id, name in label_map.entries.items():
        if apply_remap(name, table) in valid_set:
            lut[label_id] = True
    lut[0] = False  # reserved "unlabeled" never matches
    return BinaryMask(lut[mask.labels])


@dataclass
class ExclusionReport:
    total: int = 0
    retained: int = 0
    dropped: dict[str, int] = field(default_factory=lambda: {"annotator_excluded": 0, "no_mask": 0})


def filter_evaluable_pairs(index: DatasetIndex) -> tuple[list[EvaluablePair], ExclusionReport]:
    """Keep non-excluded pairs whose consolidated mask has at least one set pixel."""
    pairs: list[EvaluablePair] = []
    report = ExclusionReport()
    for image_id in sorted(index.annotations.images):
        for ann in index.annotations.images[image_id]:
            report.total += 1
            if ann.excluded:
                report.dropped["annotator_excluded"] += 1
                continue
            mask = consolidate_mask(
                index.masks[image_id], index.label_map, index.remap, ann.valid_locations
            )
            if not mask.bits.any():
                report.dropped["no_mask"] += 1
                continue
            report.retained += 1
            pairs.append(EvaluablePair(image_id, ann.object_name, mask))
    return pairs, report


def derive_seed(seed: int, image_id: str = "", object_name: str = "") -> int:
    """Platform-stable per-pair seed derivation."""
    digest = hashlib.sha256(f"{seed}|{image_id}|{object_name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def random_placement(
    width: int, height: int, seed: int, image_id: str = "", object_name: str = "",
) -> Point2D:
    """Uniform pixel draw, reproducible across runs and platforms.

    Draws for distinct (image, object) pairs are decorrelated by hashing the
    pair identity into the seed.
    """
    if width < 1 or height < 1:
        raise DimensionMismatchError(f"grid {width}x{height} has no pixels")
    rng = np.random.default_rng(derive_seed(seed, image_id, object_name))
    return Point2D(int(rng.integers(0, width)), int(rng.integers(0, height)))


def baseline_placements(
    index: DatasetIndex, pairs: list[EvaluablePair], kind: str, seed: int = 0,
) -> dict[tuple[str, str], Point2D]:
    """Placements for every evaluable pair: random draws or annotated points."""
    if kind not in ("random", "natural", "unnatural"):
        raise ValueError(f"unknown baseline kind {kind!r}")
    ann_by_pair = {
        (image_id, a.object_name): a
        for image_id, anns in index.annotations.images.items()
        for a in anns
    }
    out: dict[tuple[str, str], Point2D] = {}
    for pair in pairs:
        key = (pair.image_id, pair.object_name)
        if kind == "random":
            image = index.images[pair.image_id]
            out[key] = random_placement(
                image.width, image.height, seed, pair.image_id, pair.object_name
            )
        else:
            point = getattr(ann_by_pair[key], kind)
            if point is None:
                raise MissingAnnotationPointError(
                    f"{pair.image_id}/{pair.object_name}: no {kind} annotation point"
                )
            out[key] = point
    return out


def index_digest(index: DatasetIndex) -> str:
    """Stable sha256 digest of the full validated index contents."""
    h = hashlib.sha256()
    h.update(json.dumps(sorted(index.label_map.entries.items())).encode())
    h.update(json.dumps(sorted(index.remap.rules.items())).encode())
    h.update(json.dumps(list(index.annotations.objects)).encode())
    for image_id in sorted(index.images):
        image = index.images[image_id]
        h.update(image_id.encode())
        h.update(np.asarray([image.width, image.height], dtype="<i4").tobytes())
        h.update(hashlib.sha256(image.rgb.tobytes()).digest())
        if image.depth is not None:
            h.update(hashlib.sha256(np.ascontiguousarray(image.depth, dtype="<u2").tobytes()).digest())
        h.update(hashlib.sha256(
            np.ascontiguousarray(index.masks[image_id].labels, dtype="<i4").tobytes()
        ).digest())
        for ann in index.annotations.images.get(image_id, ()):
            h.update(json.dumps([
                ann.object_name,
                list(ann.natural) if ann.natural else None,
                list(ann.unnatural) if ann.unnatural else None,
                list(ann.valid_locations),
                ann.excluded,
            ]).encode())
    return h.hexdigest()
