"""Interactive erase service: scene payload, mutations, undo, caching, errors."""

from __future__ import annotations

import numpy as np
import pytest
from fastapi.testclient import TestClient

from planefill.errors import PipelineError
from planefill.imgio import decode_png_rgb
from planefill.pipeline import PipelineConfig
from planefill.service import create_app, mask_outline, polygon_mask_iou

FAST_CONFIG = PipelineConfig(
    backend={"kind": "diffusion"},
    target_long_side=128,
    mask_dilation_px=2,
    feather_px=2,
    histogram_match=False,
    seed=0,
)


@pytest.fixture()
def client(room_bundle):
    app = create_app(room_bundle, FAST_CONFIG)
    return TestClient(app)


class TestOutline:
    def test_square_outline_tight(self):
        mask = np.zeros((40, 40), dtype=bool)
        mask[5:25, 5:25] = True
        poly = mask_outline(mask)
        assert len(poly) >= 3
        assert polygon_mask_iou(poly, mask) >= 0.95
        xs = [p[0] for p in poly]
        ys = [p[1] for p in poly]
        assert min(xs) >= 5 and max(xs) <= 24
        assert min(ys) >= 5 and max(ys) <= 24

    def test_l_shape_outline(self):
        mask = np.zeros((40, 40), dtype=bool)
        mask[5:35, 5:15] = True
        mask[25:35, 5:35] = True
        assert polygon_mask_iou(mask_outline(mask), mask) >= 0.95

    def test_empty_mask(self):
        assert mask_outline(np.zeros((10, 10), dtype=bool)) == []

    def test_exact_rectangle_iou_is_one(self):
        mask = np.zeros((30, 30), dtype=bool)
        mask[5:25, 5:25] = True
        poly = [[5, 5], [24, 5], [24, 24], [5, 24]]
        assert polygon_mask_iou(poly, mask) == pytest.approx(1.0)


class TestScenePayload:
    def test_shape_and_outlines(self, client, room_bundle):
        payload = client.get("/api/scene").json()
        assert payload["width"] == 240 and payload["height"] == 180
        assert payload["erased"] == []
        assert {p["id"] for p in payload["planes"]} == {"floor", "back_wall", "left_wall"}
        assert {i["id"] for i in payload["instances"]} == {"crate", "cabinet"}
        for inst in payload["instances"]:
            mask = room_bundle.instance_by_id(inst["id"]).mask
            assert polygon_mask_iou(inst["outline"], mask) >= 0.95
            x, y, w, h = inst["bbox"]
            ys, xs = np.nonzero(mask)
            assert (x, y, w, h) == (xs.min(), ys.min(), xs.max() - xs.min() + 1, ys.max() - ys.min() + 1)

    def test_original_image_roundtrip(self, client, room_bundle):
        resp = client.get("/api/image/original")
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "image/png"
        assert np.array_equal(decode_png_rgb(resp.content), room_bundle.image)

    def test_current_equals_original_before_any_erase(self, client, room_bundle):
        resp = client.get("/api/image/current")
        assert np.array_equal(decode_png_rgb(resp.content), room_bundle.image)


class TestMutations:
    def test_erase_then_restore_roundtrip(self, client, room_bundle):
        erased = client.post("/api/erase", json={"ids": ["crate"]})
        assert erased.status_code == 200
        body = erased.json()
        assert body["erased"] == ["crate"]
        assert body["cached"] is False
        assert set(body["timings"]) == {"rectify", "backend", "unrectify", "composite", "final_pass"}
        after = decode_png_rgb(client.get("/api/image/current").content)
        crate = room_bundle.instance_by_id("crate").mask
        assert not np.array_equal(after[crate], room_bundle.image[crate])

        restored = client.post("/api/restore", json={"ids": ["crate"]})
        assert restored.json()["erased"] == []
        back = decode_png_rgb(client.get("/api/image/current").content)
        assert np.array_equal(back, room_bundle.image)

    def test_cache_hit_on_repeat(self, client):
        first = client.post("/api/erase", json={"ids": ["crate"]})
        assert first.json()["cached"] is False
        client.post("/api/restore", json={"ids": ["crate"]})
        again = client.post("/api/erase", json={"ids": ["crate"]})
        assert again.json()["cached"] is True

    def test_unknown_id_404_lists_valid(self, client):
        resp = client.post("/api/erase", json={"ids": ["sofa"]})
        assert resp.status_code == 404
        detail = resp.json()["detail"]
        assert "sofa" in detail and "crate" in detail and "cabinet" in detail

    def test_restore_of_unerased_id_is_noop(self, client):
        resp = client.post("/api/restore", json={"ids": ["crate"]})
        assert resp.status_code == 200
        assert resp.json()["erased"] == []

    def test_malformed_body_flattened_to_400(self, client):
        resp = client.post("/api/erase", json={"wrong": 1})
        assert resp.status_code == 400
        assert resp.json()["detail"] == "malformed request body"

    def test_busy_session_409(self, client):
        state = client.app.state.session
        assert state.lock.acquire(blocking=False)
        try:
            resp = client.post("/api/erase", json={"ids": ["crate"]})
            assert resp.status_code == 409
        finally:
            state.lock.release()

    def test_pipeline_failure_500(self, client, monkeypatch):
        import planefill.service as service

        def boom(*args, **kwargs):
            raise PipelineError("plane 'floor' rectify: contrived")

        monkeypatch.setattr(service, "erase", boom)
        resp = client.post("/api/erase", json={"ids": ["crate"]})
        assert resp.status_code == 500
        assert "floor" in resp.json()["detail"]


class TestUndo:
    def test_undo_restores_previous_set_bit_exactly(self, client, room_bundle):
        client.post("/api/erase", json={"ids": ["crate"]})
        undone = client.post("/api/undo")
        assert undone.status_code == 200
        assert undone.json()["erased"] == []
        img = decode_png_rgb(client.get("/api/image/current").content)
        assert np.array_equal(img, room_bundle.image)

    def test_undo_without_history_400(self, client):
        resp = client.post("/api/undo")
        assert resp.status_code == 400
        assert resp.json()["detail"] == "nothing to undo"

    def test_noop_erase_does_not_stack_history(self, client):
        client.post("/api/erase", json={"ids": ["crate"]})
        client.post("/api/erase", json={"ids": ["crate"]})  # no-op repeat
        assert client.post("/api/undo").status_code == 200
        assert client.post("/api/undo").status_code == 400


class TestStaticFrontend:
    def test_mounted_dir_served_at_root(self, room_bundle, tmp_path):
        (tmp_path / "index.html").write_text("<html><body>planefill</body></html>")
        app = create_app(room_bundle, FAST_CONFIG, static_dir=tmp_path)
        client = TestClient(app)
        resp = client.get("/")
        assert resp.status_code == 200
        assert "planefill" in resp.text
        # API endpoints still reachable alongside the static mount
        assert client.get("/api/scene").status_code == 200
