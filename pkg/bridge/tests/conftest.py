import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pearl_bridge.registry import ModelRegistry
from pearl_bridge.server import create_app


def stub_config(**overrides) -> dict:
    endpoints = {
        "tag": {"kind": "import", "target": "stub_models:make_tagger"},
        "detect": {"kind": "import", "target": "stub_models:make_detector"},
        "segment": {"kind": "import", "target": "stub_models:make_segmenter"},
        "heatmap": {"kind": "import", "target": "stub_models:make_heatmapper"},
        "vqa": {"kind": "import", "target": "stub_models:make_vqa"},
        "chat": {"kind": "import", "target": "stub_models:make_chat"},
        "edit": {"kind": "import", "target": "stub_models:make_editor"},
    }
    endpoints.update(overrides)
    return {"endpoints": endpoints}


@pytest.fixture()
def full_app(tmp_path):
    import json

    vectors = {
        "couch": [1.0, 0.0, 0.0],
        "sofa": [0.9, 0.43588989435, 0.0],
        "table": [0.0, 1.0, 0.0],
    }
    vec_path = tmp_path / "vectors.json"
    vec_path.write_text(json.dumps({"dim": 3, "vectors": vectors}))
    config = stub_config(embed={"kind": "fixture", "path": str(vec_path)})
    registry = ModelRegistry.from_config(config)
    registry.startup_check()
    return create_app(registry)


@pytest.fixture()
def rgb_image() -> np.ndarray:
    rng = np.random.default_rng(5)
    return rng.integers(0, 255, (24, 32, 3), dtype=np.uint8)
