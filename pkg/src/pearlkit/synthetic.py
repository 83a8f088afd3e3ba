"""Synthetic scene generator for benchmarks, demos, and fixtures.

Scenes are flat-colored rectangular surface regions on a shaded background.
Each annotated object gets its own region, a natural point at the region's
deepest interior pixel, and an unnatural point at the background pixel
farthest from the region, so generated datasets have a known best/worst
placement structure.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import Point2D, euclidean_distance_transform, innermost_point
from .scene_data import (
    DEFAULT_OBJECTS,
    AnnotationSet,
    DatasetIndex,
    LabelMap,
    LabelMask,
    ObjectAnnotation,
    RemapTable,
    SceneImage,
    consolidate_mask,
)

SURFACES = (
    "table", "floor", "couch", "counter", "desk", "bed",
    "shelf", "rug", "chair", "sofa", "cabinet", "windowsill",
)
LABEL_IDS = {name: i + 1 for i, name in enumerate(SURFACES)}
DEFAULT_REMAP = {"sofa": "couch", "coffee table": "table"}


def _region_color(label_id: int) -> tuple[int, int, int]:
    rng = np.random.default_rng(label_id * 7919)
    return tuple(int(c) for c in rng.integers(40, 220, 3))


def _farthest_background_point(mask) -> Point2D:
    field = euclidean_distance_transform(mask, target=0)  # grows over background
    scored = np.where(mask.bits, -1, field.squared)
    i = int(np.argmax(scored))
    y, x = divmod(i, mask.width)
    return Point2D(x, y)


def generate_benchmark(
    n_scenes: int = 10,
    width: int = 96,
    height: int = 72,
    objects_per_scene: int = 2,
    area_range: tuple[float, float] = (0.10, 0.40),
    seed: int = 0,
    with_depth: bool = False,
    with_exclusions: bool = False,
) -> DatasetIndex:
    """Build an in-memory dataset index of synthetic annotated scenes."""
    rng = np.random.default_rng(seed)
    margin = 2
    images: dict[str, SceneImage] = {}
    masks: dict[str, LabelMask] = {}
    ann_images: dict[str, tuple[ObjectAnnotation, ...]] = {}
    label_map = LabelMap(dict((i, n) for n, i in LABEL_IDS.items()))
    remap = RemapTable(dict(DEFAULT_REMAP))

    for s in range(n_scenes):
        image_id = f"scene{s:04d}"
        labels = np.zeros((height, width), dtype=np.int32)
        strip_w = width // objects_per_scene
        surfaces: list[str] = []
        for j in range(objects_per_scene):
            surface = SURFACES[int(rng.integers(0, len(SURFACES)))]
            while surface in surfaces:
                surface = SURFACES[int(rng.integers(0, len(SURFACES)))]
            surfaces.append(surface)

            frac = float(rng.uniform(*area_range))
            x_lo, x_hi = j * strip_w, (j + 1) * strip_w
            max_w = (x_hi - x_lo) - 2 * margin
            max_h = height - 2 * margin
            # fit a rectangle of roughly frac * width * height pixels in the strip
            h_r = min(max_h, max(2, int(round(frac * width * height / max_w))))
            w_r = min(max_w, max(2, int(round(frac * width * height / h_r))))
            x0 = x_lo + margin + int(rng.integers(0, max(1, max_w - w_r + 1)))
            y0 = margin + int(rng.integers(0, max(1, max_h - h_r + 1)))
            labels[y0:y0 + h_r, x0:x0 + w_r] = LABEL_IDS[surface]

        mask = LabelMask(labels)
        rgb = np.zeros((height, width, 3), dtype=np.uint8)
        shade = (np.linspace(30, 90, height).astype(np.uint8))[:, None]
        rgb[:, :, 0] = shade
        rgb[:, :, 1] = shade
        rgb[:, :, 2] = shade + 20
        for surface in surfaces:
            rgb[labels == LABEL_IDS[surface]] = _region_color(LABEL_IDS[surface])
        noise = rng.integers(0, 12, (height, width, 1), dtype=np.uint8)
        rgb = np.clip(rgb.astype(np.int16) + noise, 0, 255).astype(np.uint8)

        depth = None
        if with_depth:
            depth = (1000 + np.linspace(0, 2000, height).astype(np.uint16))[:, None].repeat(width, 1)

        anns: list[ObjectAnnotation] = []
        object_pool = [
            DEFAULT_OBJECTS[(s * objects_per_scene + j) % len(DEFAULT_OBJECTS)]
            for j in range(len(DEFAULT_OBJECTS))
        ]
        object_pool = list(dict.fromkeys(object_pool))  # rotate, drop repeats
        for j, surface in enumerate(surfaces):
            object_name = object_pool.pop(0)
            valid = (remap.rules.get(surface, surface),)
            region = consolidate_mask(mask, label_map, remap, valid)
            anns.append(ObjectAnnotation(
                object_name=object_name,
                natural=innermost_point(region),
                unnatural=_farthest_background_point(region),
                valid_locations=valid,
                excluded=False,
            ))
        if with_exclusions and s % 3 == 0:
            anns.append(ObjectAnnotation(
                object_name=object_pool.pop(0),
                natural=None, unnatural=None, valid_locations=(), excluded=True,
            ))
        if with_exclusions and s % 4 == 0:
            # annotated location that no mask label provides -> dropped as no_mask
            anns.append(ObjectAnnotation(
                object_name=object_pool.pop(0),
                natural=Point2D(0, 0), unnatural=Point2D(width - 1, height - 1),
                valid_locations=("fireplace",), excluded=False,
            ))

        images[image_id] = SceneImage(id=image_id, rgb=rgb, depth=depth)
        masks[image_id] = mask
        ann_images[image_id] = tuple(anns)

    annotations = AnnotationSet(objects=tuple(DEFAULT_OBJECTS), images=ann_images)
    return DatasetIndex(
        root=Path("<memory>"), images=images, masks=masks,
        label_map=label_map, remap=remap, annotations=annotations,
    )


def write_dataset(index: DatasetIndex, root: str | Path) -> Path:
    """Serialize an index to the on-disk dataset layout."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(exist_ok=True)

    for image_id in sorted(index.images):
        image = index.images[image_id]
        Image.fromarray(np.asarray(image.rgb)).save(root / "images" / f"{image_id}.png")
        labels16 = index.masks[image_id].labels.astype(np.uint16)
        Image.fromarray(labels16).save(root / "masks" / f"{image_id}.png")
        if image.depth is not None:
            (root / "depth").mkdir(exist_ok=True)
            Image.fromarray(np.asarray(image.depth, dtype=np.uint16)).save(
                root / "depth" / f"{image_id}.png"
            )

    lines = [f"{i}\t{n}" for i, n in sorted(index.label_map.entries.items())]
    (root / "labelmap.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (root / "remap.json").write_text(
        json.dumps({"rules": index.remap.rules}, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    images_doc: dict[str, dict] = {}
    for image_id in sorted(index.annotations.images):
        per_object: dict[str, dict] = {}
        for a in index.annotations.images[image_id]:
            per_object[a.object_name] = {
                "natural": list(a.natural) if a.natural else None,
                "unnatural": list(a.unnatural) if a.unnatural else None,
                "valid_locations": list(a.valid_locations),
                "excluded": a.excluded,
            }
        images_doc[image_id] = per_object
    annotations_doc = {"objects": list(index.annotations.objects), "images": images_doc}
    (root / "annotations.json").write_text(
        json.dumps(annotations_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return root
