"""Scene model: canonicalization, validation, and disk round-trips."""

from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planefill.errors import GeometryError, SceneError
from planefill.scene import (
    CameraIntrinsics,
    InstanceMask,
    Plane,
    PlaneKind,
    SceneBundle,
    canonicalize_plane,
    load_scene,
    plane_ray_depths,
    save_scene,
    validate_scene,
)


def _intr(w=64, h=48):
    return CameraIntrinsics(fx=60.0, fy=60.0, cx=(w - 1) / 2, cy=(h - 1) / 2, width=w, height=h)


def _tiny_bundle(w=64, h=48):
    intr = _intr(w, h)
    img = np.full((h, w, 3), 128, dtype=np.uint8)
    support = np.zeros((h, w), dtype=bool)
    support[h // 2 :, :] = True
    # camera +y points down, so a floor below the camera is n=(0,1,0), d>0
    plane = Plane(
        id="floor",
        normal=np.array([0.0, 1.0, 0.0]),
        offset=1.5,
        support_mask=support,
        kind=PlaneKind.FLOOR,
    )
    imask = np.zeros((h, w), dtype=bool)
    imask[10:20, 10:20] = True
    inst = InstanceMask(id="box", label="box", mask=imask)
    return SceneBundle(image=img, intrinsics=intr, planes=[plane], instances=[inst])


class TestCanonicalize:
    def test_scales_to_unit_normal(self):
        n, d = canonicalize_plane(np.array([0.0, 0.0, 2.0]), 4.0)
        assert np.allclose(n, [0.0, 0.0, 1.0])
        assert d == pytest.approx(2.0)

    def test_flips_negative_offset(self):
        n, d = canonicalize_plane(np.array([0.0, 0.0, -1.0]), -2.0)
        assert np.allclose(n, [0.0, 0.0, 1.0])
        assert d == pytest.approx(2.0)

    def test_already_canonical_unchanged(self):
        n, d = canonicalize_plane(np.array([0.0, 1.0, 0.0]), 3.0)
        assert np.allclose(n, [0.0, 1.0, 0.0])
        assert d == pytest.approx(3.0)

    def test_zero_normal_rejected(self):
        with pytest.raises(GeometryError):
            canonicalize_plane(np.zeros(3), 1.0)

    def test_zero_offset_rejected(self):
        with pytest.raises(GeometryError):
            canonicalize_plane(np.array([1.0, 0.0, 0.0]), 0.0)

    @settings(max_examples=60, deadline=None)
    @given(
        st.tuples(
            st.floats(-5, 5, allow_nan=False),
            st.floats(-5, 5, allow_nan=False),
            st.floats(-5, 5, allow_nan=False),
        ).filter(lambda v: np.linalg.norm(v) > 1e-3),
        st.floats(-10, 10, allow_nan=False).filter(lambda d: abs(d) > 1e-3),
    )
    def test_idempotent_and_same_plane(self, nvec, d0):
        n1, d1 = canonicalize_plane(np.array(nvec), d0)
        n2, d2 = canonicalize_plane(n1, d1)
        assert np.allclose(n1, n2, atol=1e-12)
        assert d1 == pytest.approx(d2, abs=1e-12)
        assert np.linalg.norm(n1) == pytest.approx(1.0, abs=1e-12)
        assert d1 > 0
        # a point satisfying the original equation satisfies the canonical one
        point = np.array(nvec) * d0 / np.dot(nvec, nvec)
        assert np.dot(n1, point) == pytest.approx(d1, abs=1e-9)


class TestRayDepths:
    def test_frontal_plane_depth_at_principal_point(self):
        intr = _intr()
        plane = Plane("back", np.array([0.0, 0.0, 1.0]), 4.0, np.ones((48, 64), dtype=bool))
        depths = plane_ray_depths(plane, intr)
        # ray through the principal point is the optical axis: t = offset
        assert depths[int(intr.cy), int(intr.cx)] == pytest.approx(4.0)
        assert np.isfinite(depths).all()

    def test_parallel_rays_get_inf(self):
        # integer principal point so the center column is exactly parallel
        intr = CameraIntrinsics(fx=60.0, fy=60.0, cx=32.0, cy=24.0, width=64, height=48)
        plane = Plane("wall", np.array([1.0, 0.0, 0.0]), 2.0, np.ones((48, 64), dtype=bool))
        depths = plane_ray_depths(plane, intr)
        assert np.isinf(depths[:, 32]).all()
        assert np.isfinite(depths[:, 37]).all()

    def test_behind_camera_is_inf(self):
        intr = CameraIntrinsics(fx=60.0, fy=60.0, cx=32.0, cy=24.0, width=64, height=48)
        plane = Plane("wall", np.array([1.0, 0.0, 0.0]), 2.0, np.ones((48, 64), dtype=bool))
        depths = plane_ray_depths(plane, intr)
        # dx < 0 gives negative t for this wall
        assert np.isinf(depths[:, 27]).all()


class TestValidate:
    def test_clean_bundle_has_no_violations(self):
        assert validate_scene(_tiny_bundle()) == []

    def test_room_fixture_is_clean(self, room_bundle):
        assert validate_scene(room_bundle) == []

    def test_non_unit_normal_flagged(self):
        b = _tiny_bundle()
        b.planes[0].normal = np.array([0.0, -2.0, 0.0])
        msgs = [str(v) for v in validate_scene(b)]
        assert any("unit" in m for m in msgs)

    def test_negative_offset_flagged(self):
        b = _tiny_bundle()
        b.planes[0].offset = -1.0
        msgs = [str(v) for v in validate_scene(b)]
        assert any("offset" in m for m in msgs)

    def test_duplicate_plane_id_flagged(self):
        b = _tiny_bundle()
        b.planes.append(b.planes[0])
        msgs = [str(v) for v in validate_scene(b)]
        assert any("duplicate" in m for m in msgs)

    def test_duplicate_instance_id_flagged(self):
        b = _tiny_bundle()
        b.instances.append(b.instances[0])
        msgs = [str(v) for v in validate_scene(b)]
        assert any("duplicate" in m for m in msgs)

    def test_empty_instance_mask_flagged(self):
        b = _tiny_bundle()
        b.instances[0].mask = np.zeros_like(b.instances[0].mask)
        msgs = [str(v) for v in validate_scene(b)]
        assert any("empty" in m for m in msgs)

    def test_wrong_mask_dims_flagged(self):
        b = _tiny_bundle()
        b.instances[0].mask = np.zeros((32, 32), dtype=bool)
        msgs = [str(v) for v in validate_scene(b)]
        assert any("shape" in m for m in msgs)

    def test_support_behind_camera_flagged(self):
        b = _tiny_bundle()
        # flip the floor normal so its support rays now hit at negative depth
        b.planes[0].normal = np.array([0.0, -1.0, 0.0])
        msgs = [str(v) for v in validate_scene(b)]
        assert any("positive depth" in m for m in msgs)


class TestRoundTrip:
    def test_save_load_preserves_everything(self, tmp_path):
        b = _tiny_bundle()
        save_scene(b, tmp_path / "scene")
        b2 = load_scene(tmp_path / "scene")
        assert np.array_equal(b2.image, b.image)
        assert b2.intrinsics == b.intrinsics
        assert [p.id for p in b2.planes] == [p.id for p in b.planes]
        for p, q in zip(b.planes, b2.planes):
            assert np.allclose(q.normal, p.normal, atol=1e-9)
            assert q.offset == pytest.approx(p.offset, abs=1e-9)
            assert np.array_equal(q.support_mask, p.support_mask)
            assert q.kind == p.kind
        assert [i.id for i in b2.instances] == [i.id for i in b.instances]
        for i, j in zip(b.instances, b2.instances):
            assert j.label == i.label
            assert np.array_equal(j.mask, i.mask)
        assert b2.warnings == []

    def test_room_scene_round_trip(self, room_bundle, tmp_path):
        save_scene(room_bundle, tmp_path / "room")
        b2 = load_scene(tmp_path / "room")
        assert np.array_equal(b2.image, room_bundle.image)
        assert len(b2.planes) == len(room_bundle.planes)
        assert len(b2.instances) == len(room_bundle.instances)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(SceneError, match="manifest"):
            load_scene(tmp_path / "nope")

    def test_invalid_json(self, tmp_path):
        d = tmp_path / "scene"
        d.mkdir()
        (d / "scene.json").write_text("{not json")
        with pytest.raises(SceneError, match="JSON"):
            load_scene(d)

    def test_non_unit_normal_renormalized_with_warning(self, tmp_path):
        b = _tiny_bundle()
        save_scene(b, tmp_path / "scene")
        manifest = json.loads((tmp_path / "scene" / "scene.json").read_text())
        manifest["planes"][0]["normal"] = [0.0, 0.0, 2.0]
        manifest["planes"][0]["offset"] = 6.0
        (tmp_path / "scene" / "scene.json").write_text(json.dumps(manifest))
        b2 = load_scene(tmp_path / "scene")
        assert np.allclose(b2.planes[0].normal, [0.0, 0.0, 1.0])
        assert b2.planes[0].offset == pytest.approx(3.0)
        assert any("renormalized" in w for w in b2.warnings)

    def test_mask_dims_mismatch_raises(self, tmp_path):
        from planefill.imgio import write_mask

        b = _tiny_bundle()
        save_scene(b, tmp_path / "scene")
        write_mask(tmp_path / "scene" / "planes" / "floor.png", np.ones((32, 32), dtype=bool))
        with pytest.raises(SceneError, match="32"):
            load_scene(tmp_path / "scene")

    def test_missing_mask_file_raises(self, tmp_path):
        b = _tiny_bundle()
        save_scene(b, tmp_path / "scene")
        (tmp_path / "scene" / "instances" / "box.png").unlink()
        with pytest.raises(SceneError, match="mask"):
            load_scene(tmp_path / "scene")

    def test_duplicate_ids_raise_on_load(self, tmp_path):
        b = _tiny_bundle()
        save_scene(b, tmp_path / "scene")
        manifest = json.loads((tmp_path / "scene" / "scene.json").read_text())
        manifest["planes"].append(manifest["planes"][0])
        (tmp_path / "scene" / "scene.json").write_text(json.dumps(manifest))
        with pytest.raises(SceneError, match="duplicate"):
            load_scene(tmp_path / "scene")
