"""Analytic test-scene renderer: textured room planes plus simple box furniture.

Everything is ray-cast per pixel with closed-form plane and box intersections,
deliberately sharing no code with the geometry module so rendered scenes act as
an independent oracle for rectification and removal quality. Camera convention
matches the rest of the package: x right, y down, z forward, rays through
integer pixel centers.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .imgio import write_mask, write_rgb
from .scene import CameraIntrinsics, InstanceMask, Plane, PlaneKind, SceneBundle

Texture = Callable[[np.ndarray, np.ndarray], np.ndarray]


def plane_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal (e1, e2) spanning the plane with the given normal."""
    n = np.asarray(normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = helper - np.dot(helper, n) * n
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2


def checkerboard(square_m: float, color_a, color_b, wave_amp: float = 0.0) -> Texture:
    """Checker texture in plane coordinates; optional long-wave brightness ripple."""
    a = np.asarray(color_a, dtype=np.float64)
    b = np.asarray(color_b, dtype=np.float64)

    def tex(u: np.ndarray, v: np.ndarray) -> np.ndarray:
        idx = (np.floor(u / square_m) + np.floor(v / square_m)).astype(np.int64) % 2
        out = np.where(idx[..., None] == 0, a, b)
        if wave_amp > 0.0:
            out = out + (wave_amp * np.sin(u / 1.37 + v / 2.11))[..., None]
        return out

    return tex


def stripes(period_m: float, angle_rad: float, color_a, color_b, wave_amp: float = 0.0) -> Texture:
    a = np.asarray(color_a, dtype=np.float64)
    b = np.asarray(color_b, dtype=np.float64)
    cos_t, sin_t = float(np.cos(angle_rad)), float(np.sin(angle_rad))

    def tex(u: np.ndarray, v: np.ndarray) -> np.ndarray:
        coord = u * cos_t + v * sin_t
        phase = np.mod(coord / period_m, 1.0)
        out = np.where(phase[..., None] < 0.5, a, b)
        if wave_amp > 0.0:
            out = out + (wave_amp * np.sin(u / 1.53 + v / 1.91))[..., None]
        return out

    return tex


@dataclass
class RenderPlane:
    id: str
    normal: np.ndarray  # unit, camera-side convention n.X = offset > 0
    offset: float
    texture: Texture
    kind: PlaneKind = PlaneKind.OTHER

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        self.normal = n / np.linalg.norm(n)


@dataclass
class Box:
    """Axis-aligned box given by its two opposite corners in camera space."""

    id: str
    lo: np.ndarray
    hi: np.ndarray
    color: np.ndarray
    label: str = "box"

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        self.color = np.asarray(self.color, dtype=np.float64)


@dataclass
class RoomRender:
    empty_image: np.ndarray
    furnished_image: np.ndarray
    plane_supports: dict
    instance_masks: dict
    depth: np.ndarray


def _rays(camera: CameraIntrinsics) -> np.ndarray:
    xs = np.arange(camera.width, dtype=np.float64)
    ys = np.arange(camera.height, dtype=np.float64)
    xx, yy = np.meshgrid(xs, ys)
    rays = np.stack(
        [(xx - camera.cx) / camera.fx, (yy - camera.cy) / camera.fy, np.ones_like(xx)], axis=-1
    )
    return rays


def _plane_hits(rays: np.ndarray, planes: list) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel nearest plane index and hit distance t (inf where no hit)."""
    h, w = rays.shape[:2]
    ts = np.full((len(planes), h, w), np.inf)
    for i, plane in enumerate(planes):
        denom = rays @ plane.normal
        with np.errstate(divide="ignore", invalid="ignore"):
            t = plane.offset / denom
        t = np.where((np.abs(denom) > 1e-12) & (t > 0), t, np.inf)
        ts[i] = t
    nearest = np.argmin(ts, axis=0)
    t_near = np.min(ts, axis=0)
    return nearest, t_near


def _box_hit(rays: np.ndarray, box: Box) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Slab-method ray/box intersection from the origin; returns (hit, t, face axis)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = box.lo[None, None, :] / rays
        t_hi = box.hi[None, None, :] / rays
    near = np.minimum(t_lo, t_hi)
    far = np.maximum(t_lo, t_hi)
    # a ray parallel to an axis never crosses that slab's bounds unless inside;
    # the camera sits at the origin outside every box here, so treat parallel
    # components as hit iff origin lies between the slabs
    for axis in range(3):
        parallel = np.abs(rays[..., axis]) < 1e-12
        inside = (box.lo[axis] <= 0.0) & (0.0 <= box.hi[axis])
        near[..., axis] = np.where(parallel, -np.inf if inside else np.inf, near[..., axis])
        far[..., axis] = np.where(parallel, np.inf if inside else -np.inf, far[..., axis])
    t_enter = near.max(axis=-1)
    t_exit = far.min(axis=-1)
    hit = (t_enter <= t_exit) & (t_exit > 0) & (t_enter > 0)
    face_axis = np.argmax(near, axis=-1)
    return hit, np.where(hit, t_enter, np.inf), face_axis


# per-face brightness so boxes read as 3D: top bright, sides dimmer
_FACE_SHADE = np.array([0.82, 1.0, 0.65])


def render_room(camera: CameraIntrinsics, planes: list, boxes: list) -> RoomRender:
    rays = _rays(camera)
    nearest, t_room = _plane_hits(rays, planes)
    h, w = rays.shape[:2]
    empty = np.zeros((h, w, 3), dtype=np.float64)
    supports = {}
    for i, plane in enumerate(planes):
        sel = (nearest == i) & np.isfinite(t_room)
        supports[plane.id] = sel
        if not sel.any():
            continue
        pts = rays[sel] * t_room[sel][:, None]
        e1, e2 = plane_basis(plane.normal)
        empty[sel] = plane.texture(pts @ e1, pts @ e2)
    empty_u8 = np.clip(np.rint(empty), 0, 255).astype(np.uint8)

    furnished = empty.copy()
    t_scene = t_room.copy()
    instance_masks = {}
    for box in boxes:
        hit, t_box, face_axis = _box_hit(rays, box)
        visible = hit & (t_box < t_scene)
        instance_masks[box.id] = visible
        shade = _FACE_SHADE[face_axis[visible]]
        furnished[visible] = np.clip(box.color[None, :] * shade[:, None], 0, 255)
        t_scene = np.where(visible, t_box, t_scene)
    furnished_u8 = np.clip(np.rint(furnished), 0, 255).astype(np.uint8)
    return RoomRender(
        empty_image=empty_u8,
        furnished_image=furnished_u8,
        plane_supports=supports,
        instance_masks=instance_masks,
        depth=t_scene,
    )


def render_single_plane(camera: CameraIntrinsics, plane: RenderPlane) -> np.ndarray:
    """Render one plane filling the whole frame; raises if any ray misses it."""
    rays = _rays(camera)
    denom = rays @ plane.normal
    if denom.min() <= 1e-6:
        raise ValueError(f"plane '{plane.id}' does not cover the full frame")
    t = plane.offset / denom
    pts = rays * t[..., None]
    e1, e2 = plane_basis(plane.normal)
    rgb = plane.texture(pts @ e1, pts @ e2)
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)


def default_camera(width: int = 240, height: int = 180) -> CameraIntrinsics:
    # wide-ish lens so the floor band and furniture fill a useful frame share
    f = 0.55 * width
    return CameraIntrinsics(
        fx=f, fy=f, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0, width=width, height=height
    )


def room_planes() -> list:
    return [
        RenderPlane(
            id="floor",
            normal=np.array([0.0, 1.0, 0.0]),
            offset=1.6,
            texture=checkerboard(0.5, (168, 148, 120), (204, 188, 160), wave_amp=6.0),
            kind=PlaneKind.FLOOR,
        ),
        RenderPlane(
            id="back_wall",
            normal=np.array([0.0, 0.0, 1.0]),
            offset=5.0,
            texture=stripes(0.55, 0.0, (196, 202, 210), (164, 174, 188), wave_amp=5.0),
            kind=PlaneKind.WALL,
        ),
        RenderPlane(
            id="left_wall",
            normal=np.array([-1.0, 0.0, 0.0]),
            offset=2.0,
            texture=stripes(0.5, np.pi / 2, (214, 196, 170), (186, 166, 138), wave_amp=5.0),
            kind=PlaneKind.WALL,
        ),
    ]


def room_boxes() -> list:
    return [
        Box(
            id="crate",
            lo=np.array([-0.95, 0.85, 2.05]),
            hi=np.array([-0.35, 1.6, 2.65]),
            color=np.array([176, 88, 70]),
            label="crate",
        ),
        Box(
            id="cabinet",
            lo=np.array([0.45, 0.55, 2.9]),
            hi=np.array([1.15, 1.6, 3.6]),
            color=np.array([74, 102, 158]),
            label="cabinet",
        ),
    ]


def make_room_bundle(width: int = 240, height: int = 180) -> tuple[SceneBundle, np.ndarray]:
    """Furnished room bundle (floor + 2 walls + 2 boxes) plus the empty-room image.

    Supports are amodal: each plane's support covers pixels the plane owns in
    the empty room, including those a box hides in the furnished image.
    """
    camera = default_camera(width, height)
    render = render_room(camera, room_planes(), room_boxes())
    planes = [
        Plane(
            id=rp.id,
            normal=rp.normal.copy(),
            offset=rp.offset,
            support_mask=render.plane_supports[rp.id],
            kind=rp.kind,
        )
        for rp in room_planes()
    ]
    instances = [
        InstanceMask(id=b.id, label=b.label, mask=render.instance_masks[b.id])
        for b in room_boxes()
        if render.instance_masks[b.id].any()
    ]
    bundle = SceneBundle(
        image=render.furnished_image, intrinsics=camera, planes=planes, instances=instances
    )
    return bundle, render.empty_image


def write_demo_scene(out_dir: str | Path, width: int = 240, height: int = 180) -> Path:
    """Write the demo room as a loadable scene directory, with the empty room beside it."""
    from .scene import save_scene

    out = Path(out_dir)
    bundle, empty = make_room_bundle(width, height)
    save_scene(bundle, out)
    write_rgb(out / "empty.png", empty)
    return out


# palettes for the oblique-texture suite; values picked for clear periodic structure
_SUITE_SPECS = [
    ("checker", 0.6, (150, 140, 126), (208, 200, 184)),
    ("stripes", 0.65, (130, 150, 170), (190, 204, 216)),
    ("checker", 0.75, (170, 150, 120), (120, 104, 84)),
    ("stripes", 0.55, (160, 176, 150), (108, 128, 100)),
    ("checker", 0.68, (184, 168, 190), (128, 112, 136)),
]

_SUITE_NORMALS = [
    (0.25, -0.62, 0.74),
    (-0.3, -0.55, 0.78),
    (0.35, -0.5, 0.79),
    (-0.2, -0.68, 0.71),
    (0.3, -0.58, 0.76),
]


def generate_oblique_suite(
    out_dir: str | Path,
    n_scenes: int = 5,
    seed: int = 0,
    width: int = 256,
    height: int = 192,
    coverage: tuple[float, float] = (0.15, 0.35),
    max_depth_m: float = 9.0,
) -> list[Path]:
    """Write an n-scene dataset of oblique textured planes with blob masks.

    Layout per scene: image.png (ground truth), masks/mask_00.png, scene.json.
    The plane support is capped at max_depth_m of ray depth (room planes are
    bounded; an unbounded support would drag the rectified frame's extent out
    to grazing distances and starve the near field of resolution). Masks are
    regenerated deterministically until they fall inside the capped support.
    """
    from .metrics import synthesize_test_masks
    from .scene import save_scene

    out = Path(out_dir)
    camera = default_camera(width, height)
    rays = _rays(camera)
    dirs = []
    for i in range(n_scenes):
        kind, period, ca, cb = _SUITE_SPECS[i % len(_SUITE_SPECS)]
        normal = np.asarray(_SUITE_NORMALS[i % len(_SUITE_NORMALS)], dtype=np.float64)
        normal = normal / np.linalg.norm(normal)
        # mild ripple: keeps exact self-copies impossible (finite PSNR) without
        # pushing the whole-image baseline into featureless blur
        if kind == "checker":
            tex = checkerboard(period, ca, cb, wave_amp=3.0)
        else:
            tex = stripes(period, 0.35 + 0.2 * i, ca, cb, wave_amp=3.0)
        rplane = RenderPlane(id="plane", normal=normal, offset=2.0 + 0.3 * i, texture=tex)
        image = render_single_plane(camera, rplane)
        support = (rays @ rplane.normal) >= rplane.offset / max_depth_m
        bundle = SceneBundle(
            image=image,
            intrinsics=camera,
            planes=[Plane(id="plane", normal=rplane.normal, offset=rplane.offset, support_mask=support, kind=PlaneKind.OTHER)],
            instances=[],
        )
        case_dir = out / f"scene_{i:02d}"
        save_scene(bundle, case_dir)
        mask = None
        for attempt in range(40):
            cand = synthesize_test_masks(
                (height, width),
                {"count": 1, "coverage_min": coverage[0], "coverage_max": coverage[1]},
                seed=seed + i + 1000 * attempt,
            )[0]
            if (cand & ~support).sum() == 0:
                mask = cand
                break
        if mask is None:
            raise ValueError(f"suite scene {i}: no in-support mask found in 40 attempts")
        (case_dir / "masks").mkdir(exist_ok=True)
        write_mask(case_dir / "masks" / "mask_00.png", mask)
        dirs.append(case_dir)
    return dirs
