"""Object-removal orchestration: mask, per-plane rectified inpainting, compositing.

The erase entry point builds the inpaint mask from selected instances, assigns
masked pixels to planes by ray depth, fills each plane in its fronto-parallel
frame, feather-composites the fills, and runs one final image-space pass over
whatever no plane claimed. Pixels outside the inpaint mask are never altered.
"""

from __future__ import annotations

import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import geometry
from .backends import InpaintRequest, histogram_match, inpaint, make_backend
from .errors import BackendError, GeometryError, PipelineError
from .geometry import RectifiedFrame, compute_rectification, warp_image, warp_mask
from .imgio import write_mask, write_rgb
from .patchmatch import _mix_seed
from .scene import Plane, SceneBundle

ALL = object()  # sentinel: select every instance

# final-pass seed salt; crc32 of a plane id is < 2**32 so this cannot collide
_FINAL_PASS_SALT = 1 << 32


@dataclass
class PipelineConfig:
    backend: dict = field(default_factory=lambda: {"kind": "patchmatch"})
    target_long_side: int = 512
    mask_dilation_px: int = 3
    feather_px: int = 2
    histogram_match: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.target_long_side < 32:
            raise ValueError(f"target_long_side must be >= 32, got {self.target_long_side}")
        if self.mask_dilation_px < 0:
            raise ValueError(f"mask_dilation_px must be >= 0, got {self.mask_dilation_px}")
        if self.feather_px < 0:
            raise ValueError(f"feather_px must be >= 0, got {self.feather_px}")

    def to_dict(self) -> dict:
        return {
            "backend": dict(self.backend),
            "target_long_side": self.target_long_side,
            "mask_dilation_px": self.mask_dilation_px,
            "feather_px": self.feather_px,
            "histogram_match": self.histogram_match,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {"backend", "target_long_side", "mask_dilation_px", "feather_px", "histogram_match", "seed"}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown pipeline config keys: {sorted(extra)}")
        return cls(
            backend=dict(data.get("backend", {"kind": "patchmatch"})),
            target_long_side=int(data.get("target_long_side", 512)),
            mask_dilation_px=int(data.get("mask_dilation_px", 3)),
            feather_px=int(data.get("feather_px", 2)),
            histogram_match=bool(data.get("histogram_match", True)),
            seed=int(data.get("seed", 0)),
        )


@dataclass
class PlaneInpaintResult:
    plane_id: str
    claim: np.ndarray
    skipped: bool = False
    frame: RectifiedFrame | None = None
    rectified_input: np.ndarray | None = None
    rectified_mask: np.ndarray | None = None
    rectified_output: np.ndarray | None = None
    unrectified_patch: np.ndarray | None = None
    stage_ms: dict = field(default_factory=dict)


@dataclass
class PipelineResult:
    final_image: np.ndarray
    inpaint_mask: np.ndarray
    per_plane: list
    residual_mask: np.ndarray
    timings: dict


def _disk(radius: int) -> np.ndarray:
    y, x = np.ogrid[-radius : radius + 1, -radius : radius + 1]
    return y * y + x * x <= radius * radius


def dilate_mask(mask: np.ndarray, radius: int) -> np.ndarray:
    if radius <= 0 or not mask.any():
        return mask.copy()
    return ndimage.binary_dilation(mask, structure=_disk(radius))


def build_inpaint_mask(instances, selected, dilation_px: int) -> np.ndarray:
    """Union the selected instance masks, then dilate by a disk of dilation_px."""
    by_id = {inst.id: inst for inst in instances}
    if selected is ALL:
        chosen = list(by_id)
    else:
        chosen = list(selected)
        unknown = [i for i in chosen if i not in by_id]
        if unknown:
            raise PipelineError(f"unknown instance id(s): {unknown}")
    if instances:
        shape = instances[0].mask.shape
    else:
        shape = (0, 0)
    union = np.zeros(shape, dtype=bool)
    for iid in chosen:
        union |= by_id[iid].mask
    return dilate_mask(union, dilation_px)


def _seed_for_plane(config_seed: int, plane_id: str) -> int:
    return _mix_seed(config_seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(plane_id.encode("utf-8")))


def inpaint_plane(
    bundle: SceneBundle,
    plane: Plane,
    inpaint_mask: np.ndarray,
    claim: np.ndarray,
    config: PipelineConfig,
) -> PlaneInpaintResult:
    """Fill one plane's claim by rectify -> backend -> unrectify.

    The rectified fill mask is the complement of the warped known-support mask,
    so furniture, off-frame area, and other planes are all filled; only the
    claim is consumed downstream.
    """
    if not claim.any():
        return PlaneInpaintResult(plane_id=plane.id, claim=claim.copy(), skipped=True)
    stage_ms: dict = {}
    t0 = time.perf_counter()
    try:
        frame = compute_rectification(plane, bundle.intrinsics, config.target_long_side)
    except GeometryError as e:
        raise PipelineError(f"plane '{plane.id}' rectify: {e}") from e
    h = frame.h_orig_to_rect
    dims = (frame.rect_width, frame.rect_height)
    rect_input, _ = warp_image(bundle.image, h, dims)
    known_src = plane.support_mask & ~inpaint_mask
    rect_known = warp_mask(known_src, h, dims)
    rect_mask = ~rect_known
    stage_ms["rectify"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    try:
        request = InpaintRequest(rect_input, rect_mask)
    except ValueError as e:
        raise PipelineError(f"plane '{plane.id}' backend: {e}") from e
    backend = make_backend(config.backend).with_seed(_seed_for_plane(config.seed, plane.id))
    try:
        rect_output = inpaint(request, backend)
    except BackendError as e:
        raise PipelineError(f"plane '{plane.id}' backend: {e}") from e
    if config.histogram_match:
        rect_output = histogram_match(rect_output, rect_mask, rect_known)
    stage_ms["backend"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    img_h, img_w = bundle.image.shape[:2]
    unrect, _ = warp_image(rect_output, h.inverse(), (img_w, img_h))
    stage_ms["unrectify"] = (time.perf_counter() - t0) * 1000.0
    return PlaneInpaintResult(
        plane_id=plane.id,
        claim=claim.copy(),
        skipped=False,
        frame=frame,
        rectified_input=rect_input,
        rectified_mask=rect_mask,
        rectified_output=rect_output,
        unrectified_patch=unrect,
        stage_ms=stage_ms,
    )


def composite(base: np.ndarray, results: list, feather_px: int, known_mask: np.ndarray | None = None) -> np.ndarray:
    """Paste each plane's patch over its claim, feathering toward known pixels.

    The patch weight ramps linearly from the claim boundary: at distance d from
    the nearest known pixel, weight = min(1, d / (feather_px + 1)). known_mask
    defaults to the complement of all claims.
    """
    out = base.copy()
    active = [r for r in results if not r.skipped and r.claim.any()]
    if not active:
        return out
    coverage = np.zeros(base.shape[:2], dtype=np.int32)
    for r in active:
        coverage += r.claim.astype(np.int32)
    if coverage.max() > 1:
        bad = [r.plane_id for r in active if (r.claim & (coverage > 1)).any()]
        raise PipelineError(f"overlapping claims between planes {bad}")
    claimed = coverage > 0
    if known_mask is None:
        known_mask = ~claimed
    if feather_px > 0:
        # distance from each pixel to the nearest known pixel; known pixels get 0
        dist = ndimage.distance_transform_edt(~known_mask)
        weight = np.minimum(1.0, dist / float(feather_px + 1))
    else:
        weight = np.ones(base.shape[:2], dtype=np.float64)
    for r in active:
        sel = r.claim
        w = weight[sel][:, None]
        blended = w * r.unrectified_patch[sel].astype(np.float64) + (1.0 - w) * base[sel].astype(np.float64)
        out[sel] = np.clip(np.rint(blended), 0, 255).astype(np.uint8)
    return out


def _run(
    bundle: SceneBundle,
    inpaint_mask: np.ndarray,
    config: PipelineConfig,
    dump_dir: Path | None,
) -> PipelineResult:
    timings = {"rectify": 0.0, "backend": 0.0, "unrectify": 0.0, "composite": 0.0, "final_pass": 0.0}
    img_shape = bundle.image.shape[:2]
    if not inpaint_mask.any():
        return PipelineResult(
            final_image=bundle.image.copy(),
            inpaint_mask=inpaint_mask.copy(),
            per_plane=[],
            residual_mask=np.zeros(img_shape, dtype=bool),
            timings=timings,
        )
    claims, residual = geometry.assign_masked_pixels(bundle, inpaint_mask)
    per_plane = []
    for plane in bundle.planes:
        result = inpaint_plane(bundle, plane, inpaint_mask, claims[plane.id], config)
        for stage, ms in result.stage_ms.items():
            timings[stage] += ms
        per_plane.append(result)

    t0 = time.perf_counter()
    composited = composite(bundle.image, per_plane, config.feather_px, known_mask=~inpaint_mask)
    timings["composite"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    if residual.any():
        backend = make_backend(config.backend).with_seed(
            _mix_seed(config.seed & 0xFFFFFFFFFFFFFFFF, _FINAL_PASS_SALT)
        )
        try:
            final = inpaint(InpaintRequest(composited, residual), backend)
        except (BackendError, ValueError) as e:
            raise PipelineError(f"final pass: {e}") from e
    else:
        final = composited
    timings["final_pass"] = (time.perf_counter() - t0) * 1000.0

    if dump_dir is not None:
        _dump_artifacts(dump_dir, inpaint_mask, residual, per_plane, final)
    return PipelineResult(
        final_image=final,
        inpaint_mask=inpaint_mask,
        per_plane=per_plane,
        residual_mask=residual,
        timings=timings,
    )


def erase(
    bundle: SceneBundle,
    selected,
    config: PipelineConfig,
    dump_dir: Path | None = None,
) -> PipelineResult:
    """Remove the selected instances (or ALL) from the scene image."""
    mask = build_inpaint_mask(bundle.instances, selected, config.mask_dilation_px)
    if mask.shape == (0, 0):
        mask = np.zeros(bundle.image.shape[:2], dtype=bool)
    return _run(bundle, mask, config, dump_dir)


def erase_mask(
    bundle: SceneBundle,
    mask: np.ndarray,
    config: PipelineConfig,
    dump_dir: Path | None = None,
) -> PipelineResult:
    """Run the removal pipeline on an explicit mask, used verbatim (no dilation)."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != bundle.image.shape[:2]:
        raise PipelineError(f"mask shape {mask.shape} != image dims {bundle.image.shape[:2]}")
    return _run(bundle, mask, config, dump_dir)


def _dump_artifacts(dump_dir: Path, inpaint_mask, residual, per_plane, final) -> None:
    dump_dir = Path(dump_dir)
    dump_dir.mkdir(parents=True, exist_ok=True)
    write_mask(dump_dir / "inpaint_mask.png", inpaint_mask)
    write_mask(dump_dir / "residual_mask.png", residual)
    write_rgb(dump_dir / "final.png", final)
    for r in per_plane:
        if r.skipped:
            continue
        stem = r.plane_id.replace("/", "_")
        write_rgb(dump_dir / f"{stem}_rect_input.png", r.rectified_input)
        write_mask(dump_dir / f"{stem}_rect_mask.png", r.rectified_mask)
        write_rgb(dump_dir / f"{stem}_rect_output.png", r.rectified_output)
        write_rgb(dump_dir / f"{stem}_patch.png", r.unrectified_patch)
