"""Scene bundle data model: camera, planes, instance masks, and their on-disk form.

Camera convention: origin at the camera center, x right, y down, z forward.
Pixel (px, py) back-projects along K^-1 (px, py, 1), with pixel centers at
integer coordinates. Planes are stored canonically as n . X = d with a unit
normal and d > 0; support masks are amodal (they cover the plane's full image
extent, including parts hidden behind furniture).

Directory layout of a bundle:

    scene.json            manifest (intrinsics, plane and instance entries)
    image.png             8-bit RGB
    planes/<id>.png       8-bit grayscale support masks
    instances/<id>.png    8-bit grayscale instance masks
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import GeometryError, SceneError
from .imgio import read_mask, read_rgb, write_mask, write_rgb

UNIT_NORMAL_WARN_TOL = 1e-3
UNIT_NORMAL_TOL = 1e-6


class PlaneKind(str, Enum):
    FLOOR = "floor"
    CEILING = "ceiling"
    WALL = "wall"
    OTHER = "other"


@dataclass
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    @property
    def K(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]],
            dtype=np.float64,
        )

    @property
    def K_inv(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ],
            dtype=np.float64,
        )


@dataclass
class Plane:
    id: str
    normal: np.ndarray  # unit 3-vector, camera coordinates
    offset: float  # n . X = offset, meters, > 0
    support_mask: np.ndarray  # bool (height, width), amodal extent
    kind: PlaneKind = PlaneKind.OTHER


@dataclass
class InstanceMask:
    id: str
    label: str
    mask: np.ndarray  # bool (height, width)


@dataclass
class SceneBundle:
    image: np.ndarray  # uint8 (height, width, 3)
    intrinsics: CameraIntrinsics
    planes: list[Plane]
    instances: list[InstanceMask]
    warnings: list[str] = field(default_factory=list)

    def plane_by_id(self, plane_id: str) -> Plane:
        for p in self.planes:
            if p.id == plane_id:
                return p
        raise SceneError(f"unknown plane id {plane_id!r}")

    def instance_by_id(self, instance_id: str) -> InstanceMask:
        for inst in self.instances:
            if inst.id == instance_id:
                return inst
        raise SceneError(f"unknown instance id {instance_id!r}")

    @property
    def instance_ids(self) -> list[str]:
        return [inst.id for inst in self.instances]


@dataclass
class Violation:
    entity: str
    message: str

    def __str__(self) -> str:
        return f"{self.entity}: {self.message}"


def canonicalize_plane(normal: np.ndarray, offset: float) -> tuple[np.ndarray, float]:
    """Normalize (n, d) so that ||n|| = 1 and d > 0 for the same point set n.X = d.

    Raises GeometryError for a zero-norm normal or a plane through the camera
    center (d = 0 after normalization). Idempotent.
    """
    normal = np.asarray(normal, dtype=np.float64)
    nn = float(np.linalg.norm(normal))
    if nn < 1e-12:
        raise GeometryError("zero-norm plane normal")
    n = normal / nn
    d = float(offset) / nn
    if d < 0:
        n, d = -n, -d
    if d < 1e-12:
        raise GeometryError("degenerate plane through the camera center (offset 0)")
    return n, d


def plane_ray_depths(plane: Plane, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Per-pixel ray depth t with pixel p hitting the plane at t * K^-1 p.

    t = offset / (n . K^-1 p); +inf where the denominator is ~0 or the hit is
    behind the camera (t <= 0).
    """
    h, w = intrinsics.height, intrinsics.width
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    dx = (xs - intrinsics.cx) / intrinsics.fx
    dy = (ys - intrinsics.cy) / intrinsics.fy
    denom = plane.normal[0] * dx + plane.normal[1] * dy + plane.normal[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = plane.offset / denom
    t[~np.isfinite(t)] = np.inf
    t[np.abs(denom) < 1e-12] = np.inf
    t[t <= 0] = np.inf
    return t


def validate_scene(bundle: SceneBundle) -> list[Violation]:
    """Check every type invariant; violations are returned as data, not raised."""
    out: list[Violation] = []
    intr = bundle.intrinsics
    if intr.fx <= 0 or intr.fy <= 0:
        out.append(Violation("intrinsics", f"focal lengths must be positive (fx={intr.fx}, fy={intr.fy})"))
    if intr.width < 16 or intr.height < 16:
        out.append(Violation("intrinsics", f"dimensions below 16 px ({intr.width}x{intr.height})"))
    if not (0 <= intr.cx <= intr.width) or not (0 <= intr.cy <= intr.height):
        out.append(Violation("intrinsics", f"principal point ({intr.cx}, {intr.cy}) outside image"))

    if bundle.image.shape[:2] != (intr.height, intr.width):
        out.append(
            Violation(
                "image",
                f"image is {bundle.image.shape[1]}x{bundle.image.shape[0]}, "
                f"intrinsics say {intr.width}x{intr.height}",
            )
        )

    seen: set[str] = set()
    for plane in bundle.planes:
        ent = f"plane {plane.id!r}"
        if plane.id in seen:
            out.append(Violation(ent, "duplicate id"))
        seen.add(plane.id)
        nn = float(np.linalg.norm(plane.normal))
        if abs(nn - 1.0) > UNIT_NORMAL_TOL:
            out.append(Violation(ent, f"normal not unit length (||n||={nn:.6g})"))
        if plane.offset <= 0:
            out.append(Violation(ent, f"offset must be positive, got {plane.offset}"))
        if plane.support_mask.shape != (intr.height, intr.width):
            out.append(Violation(ent, f"support mask shape {plane.support_mask.shape} != image dims"))
        elif abs(nn - 1.0) <= UNIT_NORMAL_TOL and plane.offset > 0:
            depths = plane_ray_depths(plane, intr)
            bad = int(np.count_nonzero(~np.isfinite(depths[plane.support_mask])))
            if bad:
                out.append(Violation(ent, f"{bad} support pixels do not hit the plane at positive depth"))

    seen = set()
    for inst in bundle.instances:
        ent = f"instance {inst.id!r}"
        if inst.id in seen:
            out.append(Violation(ent, "duplicate id"))
        seen.add(inst.id)
        if inst.mask.shape != (intr.height, intr.width):
            out.append(Violation(ent, f"mask shape {inst.mask.shape} != image dims"))
        elif not inst.mask.any():
            out.append(Violation(ent, "empty mask"))
    return out


def _require(manifest: dict, key: str, where: str):
    if key not in manifest:
        raise SceneError(f"{where}: missing field {key!r}")
    return manifest[key]


def load_scene(path: str | Path) -> SceneBundle:
    """Load and validate a scene bundle directory.

    Normals off unit length by more than 1e-3 are renormalized with a warning
    recorded on the bundle; every plane is canonicalized to offset > 0.
    """
    root = Path(path)
    manifest_path = root / "scene.json"
    if not manifest_path.is_file():
        raise SceneError(f"missing manifest {manifest_path}")
    with open(manifest_path) as f:
        try:
            manifest = json.load(f)
        except json.JSONDecodeError as e:
            raise SceneError(f"{manifest_path}: invalid JSON ({e})") from e

    where = str(manifest_path)
    intr_raw = _require(manifest, "intrinsics", where)
    try:
        intr = CameraIntrinsics(
            fx=float(_require(intr_raw, "fx", f"{where}: intrinsics")),
            fy=float(_require(intr_raw, "fy", f"{where}: intrinsics")),
            cx=float(_require(intr_raw, "cx", f"{where}: intrinsics")),
            cy=float(_require(intr_raw, "cy", f"{where}: intrinsics")),
            width=int(_require(intr_raw, "width", f"{where}: intrinsics")),
            height=int(_require(intr_raw, "height", f"{where}: intrinsics")),
        )
    except (TypeError, ValueError) as e:
        raise SceneError(f"{where}: bad intrinsics value ({e})") from e

    image_rel = _require(manifest, "image", where)
    image_path = root / image_rel
    if not image_path.is_file():
        raise SceneError(f"missing image file {image_path}")
    image = read_rgb(image_path)

    warnings: list[str] = []
    planes: list[Plane] = []
    for i, entry in enumerate(manifest.get("planes", [])):
        ent = f"{where}: planes[{i}]"
        pid = str(_require(entry, "id", ent))
        normal = np.asarray(_require(entry, "normal", ent), dtype=np.float64)
        if normal.shape != (3,):
            raise SceneError(f"{ent}: normal must be a 3-vector, got shape {normal.shape}")
        offset = float(_require(entry, "offset", ent))
        kind_raw = str(entry.get("kind", "other"))
        try:
            kind = PlaneKind(kind_raw)
        except ValueError as e:
            raise SceneError(f"{ent}: unknown plane kind {kind_raw!r}") from e
        mask_path = root / _require(entry, "mask", ent)
        if not mask_path.is_file():
            raise SceneError(f"{ent}: missing mask file {mask_path}")
        mask = read_mask(mask_path)
        if mask.shape != (intr.height, intr.width):
            raise SceneError(
                f"{ent}: mask {mask_path.name} is {mask.shape[1]}x{mask.shape[0]}, "
                f"image is {intr.width}x{intr.height}"
            )
        nn = float(np.linalg.norm(normal))
        if abs(nn - 1.0) > UNIT_NORMAL_WARN_TOL:
            warnings.append(f"plane {pid!r}: normal {normal.tolist()} renormalized (||n||={nn:.6g})")
        try:
            n, d = canonicalize_plane(normal, offset)
        except GeometryError as e:
            raise SceneError(f"{ent}: {e}") from e
        planes.append(Plane(id=pid, normal=n, offset=d, support_mask=mask, kind=kind))

    instances: list[InstanceMask] = []
    for i, entry in enumerate(manifest.get("instances", [])):
        ent = f"{where}: instances[{i}]"
        iid = str(_require(entry, "id", ent))
        label = str(entry.get("label", ""))
        mask_path = root / _require(entry, "mask", ent)
        if not mask_path.is_file():
            raise SceneError(f"{ent}: missing mask file {mask_path}")
        mask = read_mask(mask_path)
        if mask.shape != (intr.height, intr.width):
            raise SceneError(
                f"{ent}: mask {mask_path.name} is {mask.shape[1]}x{mask.shape[0]}, "
                f"image is {intr.width}x{intr.height}"
            )
        instances.append(InstanceMask(id=iid, label=label, mask=mask))

    bundle = SceneBundle(image=image, intrinsics=intr, planes=planes, instances=instances, warnings=warnings)
    violations = validate_scene(bundle)
    if violations:
        raise SceneError(f"{where}: " + "; ".join(str(v) for v in violations))
    return bundle


def save_scene(bundle: SceneBundle, path: str | Path) -> None:
    """Write a bundle back in the directory layout load_scene reads."""
    root = Path(path)
    (root / "planes").mkdir(parents=True, exist_ok=True)
    (root / "instances").mkdir(parents=True, exist_ok=True)
    write_rgb(root / "image.png", bundle.image)
    manifest = {
        "image": "image.png",
        "intrinsics": {
            "fx": bundle.intrinsics.fx,
            "fy": bundle.intrinsics.fy,
            "cx": bundle.intrinsics.cx,
            "cy": bundle.intrinsics.cy,
            "width": bundle.intrinsics.width,
            "height": bundle.intrinsics.height,
        },
        "planes": [],
        "instances": [],
    }
    for plane in bundle.planes:
        rel = f"planes/{plane.id}.png"
        write_mask(root / rel, plane.support_mask)
        manifest["planes"].append(
            {
                "id": plane.id,
                "normal": [float(x) for x in plane.normal],
                "offset": float(plane.offset),
                "kind": plane.kind.value,
                "mask": rel,
            }
        )
    for inst in bundle.instances:
        rel = f"instances/{inst.id}.png"
        write_mask(root / rel, inst.mask)
        manifest["instances"].append({"id": inst.id, "label": inst.label, "mask": rel})
    with open(root / "scene.json", "w") as f:
        json.dump(manifest, f, indent=2)
