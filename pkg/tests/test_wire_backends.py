import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from pearlkit.backends import BackendClient, FixtureRecorder, FixtureStore, HttpBridge, open_wire_backend
from pearlkit.errors import BackendUnavailableError, FixtureLookupError
from pearlkit.geometry import BinaryMask, Heatmap
from pearlkit.synthetic import generate_benchmark
from pearlkit.wire import (
    decode_heatmap,
    decode_image,
    decode_mask,
    encode_heatmap,
    encode_image,
    encode_mask,
    request_hash,
)

from scripted import ScriptedBackend


class TestCodecs:
    def test_image_roundtrip(self):
        rng = np.random.default_rng(0)
        rgb = rng.integers(0, 256, (10, 14, 3), dtype=np.uint8)
        assert np.array_equal(decode_image(encode_image(rgb)), rgb)

    def test_mask_roundtrip(self):
        bits = np.random.default_rng(1).random((9, 7)) < 0.4
        mask = BinaryMask(bits)
        assert np.array_equal(decode_mask(encode_mask(mask)).bits, bits)

    def test_heatmap_roundtrip(self):
        values = np.random.default_rng(2).random((5, 6)).astype(np.float32)
        h = Heatmap(values.astype(np.float64))
        back = decode_heatmap(encode_heatmap(h))
        assert np.allclose(back.values, h.values, atol=1e-7)
        assert (back.width, back.height) == (6, 5)

    def test_mismatched_heatmap_rejected(self):
        wrong = Heatmap(np.zeros((3, 3)))
        client = BackendClient(type("W", (), {
            "call": lambda self, e, p: encode_heatmap(wrong)
        })())
        with pytest.raises(BackendUnavailableError):
            client.heatmap(np.zeros((4, 4, 3), dtype=np.uint8), "table")


class TestRequestHash:
    def test_stable_and_order_independent(self):
        a = request_hash("vqa", {"question": "x", "image_b64": encode_image(np.zeros((2, 2, 3), np.uint8))})
        b = request_hash("vqa", {"image_b64": encode_image(np.zeros((2, 2, 3), np.uint8)), "question": "x"})
        assert a == b

    def test_differs_across_payloads(self):
        img = encode_image(np.zeros((2, 2, 3), np.uint8))
        assert request_hash("vqa", {"question": "x", "image_b64": img}) != \
            request_hash("vqa", {"question": "y", "image_b64": img})

    def test_hash_tracks_pixels_not_png_bytes(self):
        # same pixels encoded twice may produce different PNG bytes; the hash must agree
        rgb = np.arange(2 * 3 * 3, dtype=np.uint8).reshape(2, 3, 3)
        import base64
        import io

        from PIL import Image

        buf = io.BytesIO()
        Image.fromarray(rgb).save(buf, format="PNG", compress_level=9)
        other_encoding = base64.b64encode(buf.getvalue()).decode()
        assert request_hash("edit", {"image_b64": encode_image(rgb), "instruction": "i"}) == \
            request_hash("edit", {"image_b64": other_encoding, "instruction": "i"})

    def test_endpoint_distinguishes_variants(self):
        img = encode_image(np.zeros((2, 2, 3), np.uint8))
        payload = {"image_b64": img, "threshold_multiplier": 1.0}
        assert request_hash("tag", payload) != request_hash("tag?variant=scp", payload)


@pytest.fixture(scope="module")
def wire_pair(tmp_path_factory):
    """Scripted backend plus a fixture file recorded from it."""
    index = generate_benchmark(n_scenes=2, width=48, height=36, seed=9)
    scripted = ScriptedBackend(index)
    recorder = FixtureRecorder(scripted)
    be = BackendClient(recorder)
    image = index.images[sorted(index.images)[0]]
    be.tag(image.rgb, 0.8)
    be.tag(image.rgb, 0.8)  # duplicate on purpose: must dedup
    be.detect(image.rgb, "table, floor", 0.25)
    be.vqa(image.rgb, "Is there a table in the image?")
    be.embed("couch")
    path = tmp_path_factory.mktemp("fixtures") / "session.jsonl"
    recorder.dump(path)
    return index, image, path


class TestFixtureStore:
    def test_replay_matches_live(self, wire_pair):
        index, image, path = wire_pair
        live = BackendClient(ScriptedBackend(index))
        replay = BackendClient(FixtureStore.load(path))
        assert replay.tag(image.rgb, 0.8) == live.tag(image.rgb, 0.8)
        assert replay.vqa(image.rgb, "Is there a table in the image?") == \
            live.vqa(image.rgb, "Is there a table in the image?")
        assert np.array_equal(replay.embed("couch"), live.embed("couch"))

    def test_dedup_writes_one_line_per_request(self, wire_pair):
        _, _, path = wire_pair
        lines = [json.loads(l) for l in path.read_text().splitlines()]
        hashes = [l["request_hash"] for l in lines]
        assert len(hashes) == len(set(hashes)) == 4

    def test_unmatched_request_names_hash(self, wire_pair):
        index, image, path = wire_pair
        replay = BackendClient(FixtureStore.load(path))
        with pytest.raises(FixtureLookupError) as err:
            replay.vqa(image.rgb, "Is there a dragon in the image?")
        assert err.value.request_hash in str(err.value)
        assert err.value.endpoint == "vqa"

    def test_open_wire_backend_dispatch(self, wire_pair, tmp_path):
        _, _, path = wire_pair
        assert isinstance(open_wire_backend(str(path)), FixtureStore)
        assert isinstance(open_wire_backend("http://localhost:1/x"), HttpBridge)
        with pytest.raises(BackendUnavailableError):
            open_wire_backend(str(tmp_path / "missing.jsonl"))


class _BridgeHandler(BaseHTTPRequestHandler):
    backend = None

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        payload = json.loads(self.rfile.read(length))
        endpoint = self.path.split("/v1/")[1]
        if endpoint == "broken":
            self.send_response(500)
            self.end_headers()
            self.wfile.write(b"boom")
            return
        response = json.dumps(self.backend.call(endpoint, payload)).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(response)))
        self.end_headers()
        self.wfile.write(response)

    def log_message(self, *args):
        pass


@pytest.fixture()
def http_bridge():
    index = generate_benchmark(n_scenes=1, width=32, height=24, seed=4)
    handler = type("H", (_BridgeHandler,), {"backend": ScriptedBackend(index)})
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield index, f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


class TestHttpBridge:
    def test_http_matches_in_process(self, http_bridge):
        index, url = http_bridge
        image = index.images[sorted(index.images)[0]]
        over_http = BackendClient(HttpBridge(url)).tag(image.rgb, 1.0)
        in_process = BackendClient(ScriptedBackend(index)).tag(image.rgb, 1.0)
        assert over_http == in_process

    def test_http_error_raises_backend_unavailable(self, http_bridge):
        _, url = http_bridge
        with pytest.raises(BackendUnavailableError):
            HttpBridge(url).call("broken", {})

    def test_unreachable_host(self):
        with pytest.raises(BackendUnavailableError):
            HttpBridge("http://127.0.0.1:9", timeout=0.5).call("vqa", {})
