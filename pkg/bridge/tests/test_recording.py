import json
import threading
import time

import numpy as np
import pytest
import uvicorn
from fastapi.testclient import TestClient

from pearl_bridge.recording import Recorder
from pearl_bridge.registry import ModelRegistry
from pearl_bridge.server import create_app

from conftest import stub_config

from pearlkit import FixtureStore, HttpBridge, preset, run_pipeline
from pearlkit.scene_data import SceneImage


@pytest.fixture()
def live_bridge(tmp_path):
    """Recording bridge on a real socket."""
    registry = ModelRegistry.from_config(stub_config())
    registry.startup_check()
    recorder = Recorder(tmp_path / "session.jsonl")
    app = create_app(registry, recorder=recorder)
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    for _ in range(100):
        if server.started:
            break
        time.sleep(0.05)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}", recorder
    server.should_exit = True
    thread.join(timeout=5)


def test_record_then_replay_is_byte_identical(live_bridge):
    url, recorder = live_bridge
    rng = np.random.default_rng(12)
    image = SceneImage(id="img0", rgb=rng.integers(0, 255, (24, 32, 3), dtype=np.uint8))

    live = run_pipeline(image, "cupcake", preset("octo-plus"), HttpBridge(url))
    assert len(recorder) > 0

    replayed = run_pipeline(
        image, "cupcake", preset("octo-plus"), FixtureStore.load(recorder.path)
    )
    assert replayed.to_json_bytes() == live.to_json_bytes()


def test_identical_requests_record_one_line(live_bridge):
    url, recorder = live_bridge
    rng = np.random.default_rng(13)
    image = SceneImage(id="img1", rgb=rng.integers(0, 255, (16, 16, 3), dtype=np.uint8))
    bridge = HttpBridge(url)
    from pearlkit import BackendClient

    be = BackendClient(bridge)
    be.vqa(image.rgb, "Is there a table in the image?")
    be.vqa(image.rgb, "Is there a table in the image?")
    lines = [l for l in recorder.path.read_text().splitlines() if l.strip()]
    hashes = [json.loads(l)["request_hash"] for l in lines]
    assert len(hashes) == len(set(hashes)) == 1


def test_empty_session_empty_file(tmp_path):
    recorder = Recorder(tmp_path / "empty.jsonl")
    assert recorder.path.read_text() == ""
    assert len(recorder) == 0


def test_recorded_lines_match_core_hashing(live_bridge):
    url, recorder = live_bridge
    rng = np.random.default_rng(14)
    image = SceneImage(id="img2", rgb=rng.integers(0, 255, (16, 16, 3), dtype=np.uint8))
    from pearlkit import BackendClient
    from pearlkit.wire import encode_image, request_hash

    BackendClient(HttpBridge(url)).heatmap(image.rgb, "table")
    want = request_hash("heatmap", {"image_b64": encode_image(image.rgb), "text": "table"})
    lines = [json.loads(l) for l in recorder.path.read_text().splitlines() if l.strip()]
    assert any(l["request_hash"] == want for l in lines)


def test_testclient_recording_roundtrip(tmp_path):
    """In-process variant: record through TestClient, replay with the core."""
    registry = ModelRegistry.from_config(stub_config())
    registry.startup_check()
    recorder = Recorder(tmp_path / "s.jsonl")
    client = TestClient(create_app(registry, recorder=recorder))
    import base64
    import io

    from PIL import Image

    rng = np.random.default_rng(15)
    arr = rng.integers(0, 255, (12, 12, 3), dtype=np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    payload = {
        "image_b64": base64.b64encode(buf.getvalue()).decode(),
        "question": "Is there a floor in the image?",
    }
    live = client.post("/v1/vqa", json=payload).json()
    store = FixtureStore.load(recorder.path)
    assert store.call("vqa", payload) == live
