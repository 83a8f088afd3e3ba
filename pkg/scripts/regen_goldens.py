#!/usr/bin/env python3
"""Regenerate the committed test data under tests/data/.

Produces the 10-scene dataset, a recorded fixture session covering both
presets (plus the extra calls the filter-monotonicity checks replay), the
golden placement records, the loader digest, the golden selector prompt,
the fixture embedding vectors, and the golden stage-3 report.

Run from the repository root:  python3 scripts/regen_goldens.py
"""

import json
import shutil
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from pearlkit.backends import BackendClient, FixtureRecorder
from pearlkit.cli import main as cli_main
from pearlkit.pipeline import PipelineConfig, preset, run_many, run_stage1_tag
from pearlkit.prompts import PromptTemplates, build_selector_prompt
from pearlkit.scene_data import index_digest, load_dataset
from pearlkit.synthetic import SURFACES, generate_benchmark, write_dataset

from scripted import ScriptedBackend

DATA = ROOT / "tests" / "data"
GOLDEN = DATA / "golden"


def build_dataset() -> Path:
    target = DATA / "dataset10"
    if target.exists():
        shutil.rmtree(target)
    index = generate_benchmark(
        n_scenes=10, width=64, height=48, objects_per_scene=2,
        seed=1234, with_depth=True, with_exclusions=True,
    )
    write_dataset(index, target)
    return target


def record_fixtures(index, recorder) -> list:
    be = BackendClient(recorder)
    pairs = [
        (index.images[image_id], a.object_name)
        for image_id in sorted(index.annotations.images)
        for a in index.annotations.images[image_id]
        if not a.excluded
    ]
    records = {}
    for name in ("octo-plus", "octopus"):
        records[name] = run_many(pairs, preset(name), recorder, jobs=1)

    # extra calls replayed by the filter-monotonicity checks
    for image_id in sorted(index.images):
        image = index.images[image_id]
        ram_tags = run_stage1_tag(
            image, PipelineConfig(tagger="ram", tagger_threshold_multiplier=0.8), be
        )
        be.detect(image.rgb, ", ".join(ram_tags), 0.35)
        scp_tags = run_stage1_tag(image, PipelineConfig(tagger="scp"), be)
        for tag in scp_tags:
            be.heatmap(image.rgb, tag)
    return records


def write_embeddings() -> None:
    words = sorted(set(SURFACES) | {"fireplace", "wall", "window", "room", "shadow", "reflection"})
    dim = 24
    vectors = {}
    for i, word in enumerate(words):
        rng = np.random.default_rng(900 + i)
        v = rng.normal(size=dim)
        v /= np.linalg.norm(v)
        vectors[word] = [round(float(x), 9) for x in v]
    (DATA / "embeddings.json").write_text(
        json.dumps({"dim": dim, "vectors": vectors}, indent=2, sort_keys=True) + "\n"
    )


def write_stage3_golden(dataset: Path) -> None:
    import tempfile

    out = GOLDEN / "stage3_report.csv"
    scratch = Path(tempfile.mkdtemp(prefix="pearlkit-goldens-"))
    baselines = {}
    for kind in ("natural", "random", "unnatural"):
        path = scratch / f"baseline_{kind}.jsonl"
        rc = cli_main([
            "baseline", "--kind", kind, "--dataset", str(dataset),
            "--seed", "7", "--out", str(path),
        ])
        assert rc == 0, kind
        baselines[kind] = path
    rc = cli_main([
        "eval", "--stage", "3", "--dataset", str(dataset),
        "--inputs",
        f"natural={baselines['natural']}",
        f"random={baselines['random']}",
        f"unnatural={baselines['unnatural']}",
        "--out", str(out), "--format", "csv",
    ])
    assert rc == 0


def main() -> int:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    dataset = build_dataset()
    index = load_dataset(dataset)

    (GOLDEN / "index_digest.txt").write_text(index_digest(index) + "\n")

    recorder = FixtureRecorder(ScriptedBackend(index))
    records = record_fixtures(index, recorder)
    n = recorder.dump(DATA / "fixtures.jsonl")
    print(f"fixtures: {n} lines")

    for name, recs in records.items():
        path = GOLDEN / f"records_{name.replace('-', '_')}.json"
        path.write_bytes(
            (json.dumps([r.to_dict() for r in recs], indent=2, ensure_ascii=False) + "\n").encode()
        )
        print(f"{path.name}: {len(recs)} records")

    prompt = build_selector_prompt(["floor", "table"], "cupcake", PromptTemplates())
    (GOLDEN / "selector_prompt.json").write_bytes(
        (json.dumps(prompt, indent=2, ensure_ascii=False) + "\n").encode()
    )

    write_embeddings()
    write_stage3_golden(dataset)
    print("done")
    return 0


if __name__ == "__main__":
    sys.exit(main())
