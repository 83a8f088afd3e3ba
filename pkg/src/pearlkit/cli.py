"""Command-line interface.

Exit codes: 0 success, 1 runtime/backend failure, 2 usage or validation
error. Outputs are byte-reproducible for a fixed manifest unless --timestamp
is passed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from . import __version__, files
from .backends import BackendClient, open_wire_backend
from .errors import MissingInputsError, PearlkitError
from .manifest import make_manifest
from .metrics import (
    BackendEmbeddings,
    FixtureEmbeddings,
    stage1_metrics,
    stage2_metrics,
    stage3_metrics,
)
from .pipeline import PRESET_NAMES, CameraIntrinsics, PipelineConfig, preset, run_many, run_pipeline
from .report import build_report
from .scene_data import SceneImage, baseline_placements, filter_evaluable_pairs, index_digest, load_dataset


class UsageError(Exception):
    pass


def _load_config(args) -> PipelineConfig:
    if args.preset:
        return preset(args.preset)
    if args.config:
        return PipelineConfig.from_dict(json.loads(Path(args.config).read_text(encoding="utf-8")))
    raise UsageError("one of --preset or --config is required")


def _annotate_image(rgb: np.ndarray, point, path: Path) -> None:
    img = Image.fromarray(rgb).convert("RGB")
    draw = ImageDraw.Draw(img)
    x, y = point
    r = max(3, min(img.width, img.height) // 40)
    draw.ellipse([x - r, y - r, x + r, y + r], outline=(255, 0, 0), width=2)
    draw.line([x - 2 * r, y, x + 2 * r, y], fill=(255, 0, 0), width=1)
    draw.line([x, y - 2 * r, x, y + 2 * r], fill=(255, 0, 0), width=1)
    img.save(path)


def cmd_place(args) -> int:
    if not args.object or not args.object.strip():
        raise UsageError("--object must be non-empty")
    cfg = _load_config(args)
    image_path = Path(args.image)
    if not image_path.is_file():
        raise UsageError(f"image not found: {image_path}")
    rgb = np.array(Image.open(image_path).convert("RGB"))
    depth = None
    if args.depth:
        depth = np.array(Image.open(args.depth)).astype(np.uint16)
    image = SceneImage(id=args.image_id or image_path.stem, rgb=rgb, depth=depth)

    intrinsics = None
    if args.intrinsics:
        fx, fy, cx, cy = (float(v) for v in args.intrinsics.split(","))
        intrinsics = CameraIntrinsics(fx=fx, fy=fy, cx=cx, cy=cy)

    wire = open_wire_backend(args.backend)
    record = run_pipeline(image, args.object, cfg, wire, intrinsics=intrinsics)
    manifest = make_manifest(
        config=cfg.to_dict(), backend_spec=args.backend, seed=cfg.seed, stamp=args.timestamp
    )
    doc = {"manifest": manifest.to_dict(), **record.to_dict()}
    Path(args.out).write_bytes((json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8"))
    if args.annotate:
        _annotate_image(rgb, record.point2d, Path(args.annotate))
    print(f"placed {args.object!r} at {tuple(record.point2d)} -> {args.out}")
    return 0


def _parse_inputs(raw: list[str]) -> list[tuple[str, Path]]:
    out = []
    for item in raw:
        if "=" in item:
            name, _, path = item.partition("=")
        else:
            name, path = Path(item).stem, item
        out.append((name, Path(path)))
    return out


def _embedding_provider(args):
    if args.embeddings:
        return FixtureEmbeddings.from_file(args.embeddings)
    if args.backend:
        return BackendEmbeddings(BackendClient(open_wire_backend(args.backend)))
    raise UsageError("stages 1 and 2 need --embeddings or --backend for similarity scoring")


def cmd_eval(args) -> int:
    index = load_dataset(args.dataset)
    inputs = _parse_inputs(args.inputs)
    if not inputs:
        raise UsageError("--inputs must name at least one file")
    manifest = make_manifest(
        config={"stage": args.stage, "inputs": [n for n, _ in inputs], "flat": bool(args.flat)},
        dataset_digest=index_digest(index),
        backend_spec=args.backend or args.embeddings,
        stamp=args.timestamp,
    ).to_dict()
    method_order = [name for name, _ in inputs]

    stage1 = stage2 = stage3 = None
    if args.stage == 1:
        provider = _embedding_provider(args)
        stage1 = [
            (name, stage1_metrics(files.read_tags(path), index.annotations, provider))
            for name, path in inputs
        ]
    elif args.stage == 2:
        provider = _embedding_provider(args)
        stage2 = [
            (name, stage2_metrics(files.read_selections(path), index.annotations, provider, flat=args.flat))
            for name, path in inputs
        ]
    else:
        pairs, _ = filter_evaluable_pairs(index)
        stage3 = []
        out_path = Path(args.out)
        for name, path in inputs:
            placements = files.read_placements(path)
            missing = [
                (p.image_id, p.object_name) for p in pairs
                if (p.image_id, p.object_name) not in placements
            ]
            if missing:
                raise MissingInputsError(f"{name}: placements missing for pairs {missing}")
            result = stage3_metrics(placements, pairs, jobs=args.jobs)
            stage3.append((name, result))
            audit_path = out_path.with_name(out_path.stem + f".{name}.audit.jsonl")
            files.write_audit_rows(audit_path, result.rows, manifest=manifest)

    report = build_report(
        stage1=stage1, stage2=stage2, stage3=stage3,
        method_order=method_order, manifest=manifest,
    )
    Path(args.out).write_bytes(report.render(args.format).encode("utf-8"))
    print(f"stage {args.stage} report ({args.format}) -> {args.out}")
    return 0


def cmd_baseline(args) -> int:
    index = load_dataset(args.dataset)
    pairs, _ = filter_evaluable_pairs(index)
    placements = baseline_placements(index, pairs, args.kind, seed=args.seed)
    manifest = make_manifest(
        config={"kind": args.kind},
        dataset_digest=index_digest(index),
        seed=args.seed,
        stamp=args.timestamp,
    )
    files.write_placements(args.out, placements, manifest=manifest.to_dict())
    print(f"{args.kind} baseline for {len(placements)} pairs -> {args.out}")
    return 0


def cmd_record_fixtures(args) -> int:
    from .backends import FixtureRecorder, HttpBridge

    index = load_dataset(args.dataset)
    cfg = preset(args.preset)
    recorder = FixtureRecorder(HttpBridge(args.backend_url))
    pairs = [
        (index.images[image_id], a.object_name)
        for image_id in sorted(index.annotations.images)
        for a in index.annotations.images[image_id]
        if not a.excluded
    ]
    try:
        run_many(pairs, cfg, recorder, jobs=args.jobs)
    except PearlkitError as e:
        raise PearlkitError(f"recording against {args.backend_url} failed: {e}") from e
    n = recorder.dump(args.out)
    print(f"recorded {n} unique responses over {len(pairs)} runs -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pearlkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"pearlkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("place", help="run the placement pipeline for one image and object")
    p.add_argument("--image", required=True)
    p.add_argument("--object", required=True)
    p.add_argument("--preset", choices=PRESET_NAMES)
    p.add_argument("--config", help="pipeline config JSON file")
    p.add_argument("--backend", required=True, help="fixture .jsonl path or bridge URL")
    p.add_argument("--out", required=True)
    p.add_argument("--annotate", help="write a copy of the image with the point marked")
    p.add_argument("--image-id")
    p.add_argument("--depth", help="16-bit depth PNG (millimeters)")
    p.add_argument("--intrinsics", help="fx,fy,cx,cy for 3D back-projection")
    p.add_argument("--timestamp", action="store_true")
    p.set_defaults(fn=cmd_place)

    p = sub.add_parser("eval", help="compute metrics for one or more runs")
    p.add_argument("--stage", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--inputs", nargs="+", required=True, metavar="NAME=PATH")
    p.add_argument("--embeddings", help="fixture embedding vectors JSON")
    p.add_argument("--backend", help="bridge URL or fixture file for embeddings")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "table", "json"), default="csv")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--flat", action="store_true", help="average over pairs instead of per image")
    p.add_argument("--timestamp", action="store_true")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("baseline", help="emit baseline placements for every evaluable pair")
    p.add_argument("--kind", choices=("random", "natural", "unnatural"), required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--timestamp", action="store_true")
    p.set_defaults(fn=cmd_baseline)

    p = sub.add_parser("record-fixtures", help="record a preset run against a live bridge")
    p.add_argument("--backend-url", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--preset", choices=PRESET_NAMES, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_record_fixtures)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except PearlkitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
