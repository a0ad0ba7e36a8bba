"""Plane-induced rectification: rotations, homographies, and image/mask warping.

The rectifying map for a plane is H = K_v . R . K^-1, a rotation-only virtual
camera sharing the real camera center. R turns the virtual optical axis onto
the plane normal, so the plane becomes fronto-parallel with uniform scale
f_v / offset; the virtual intrinsics K_v are fitted so the warped support mask
fills a frame whose long side equals the requested target resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError
from .scene import CameraIntrinsics, Plane, SceneBundle, plane_ray_depths

HORIZON_EPS = 1e-6


@dataclass(frozen=True)
class Homography:
    """3x3 projective map, normalized so m[2,2] = 1 (Frobenius norm 1 if m[2,2] ~ 0)."""

    m: np.ndarray

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Homography":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (3, 3):
            raise GeometryError(f"homography must be 3x3, got {m.shape}")
        det = np.linalg.det(m)
        if abs(det) <= 1e-12:
            raise GeometryError(f"homography is singular (det={det:.3g})")
        if abs(m[2, 2]) > 1e-9:
            m = m / m[2, 2]
        else:
            m = m / np.linalg.norm(m)
        return cls(m=m)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(m=np.eye(3))

    def inverse(self) -> "Homography":
        return Homography.from_matrix(np.linalg.inv(self.m))

    def compose(self, other: "Homography") -> "Homography":
        """Map applying `other` first, then `self`."""
        return Homography.from_matrix(self.m @ other.m)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform (N, 2) points; rows with |w| ~ 0 come back as nan."""
        pts = np.asarray(points, dtype=np.float64)
        ones = np.ones((pts.shape[0], 1))
        ph = np.hstack([pts, ones]) @ self.m.T
        with np.errstate(divide="ignore", invalid="ignore"):
            out = ph[:, :2] / ph[:, 2:3]
        out[np.abs(ph[:, 2]) < 1e-12] = np.nan
        return out


@dataclass(frozen=True)
class RectifiedFrame:
    plane_id: str
    h_orig_to_rect: Homography
    rect_width: int
    rect_height: int
    pixels_per_meter: float
    virtual_focal: float


def rectifying_rotation(normal: np.ndarray) -> np.ndarray:
    """Minimal rotation R with R . n = (0, 0, 1).

    Rodrigues rotation about n x z. The antiparallel case n ~ (0, 0, -1) falls
    back to a half turn about (1, 0, 0).
    """
    n = np.asarray(normal, dtype=np.float64)
    axis = np.array([n[1], -n[0], 0.0])  # n x z
    s = float(np.linalg.norm(axis))
    c = float(n[2])
    if s < 1e-9:
        if c > 0:
            return np.eye(3)
        return np.diag([1.0, -1.0, -1.0])  # pi about (1, 0, 0)
    axis = axis / s
    K = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    # sin(theta) = s, cos(theta) = c for the angle between n and z
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def compute_rectification(
    plane: Plane, intrinsics: CameraIntrinsics, target_long_side: int = 512
) -> RectifiedFrame:
    """Fit the rectifying homography and frame size for one plane.

    The warped support mask's bounding box is placed at the origin and scaled
    so its longer side spans the target resolution; the shorter side is
    rounded up. pixels_per_meter = virtual_focal / plane.offset.
    """
    if target_long_side < 32:
        raise GeometryError(f"target_long_side must be >= 32, got {target_long_side}")
    ys, xs = np.nonzero(plane.support_mask)
    if xs.size == 0:
        raise GeometryError(f"plane {plane.id!r}: empty support mask")

    R = rectifying_rotation(plane.normal)
    dx = (xs - intrinsics.cx) / intrinsics.fx
    dy = (ys - intrinsics.cy) / intrinsics.fy
    dirs = np.stack([dx, dy, np.ones_like(dx)], axis=0)  # 3 x N
    rot = R @ dirs
    dz = rot[2]
    # dz equals n . K^-1 p; near-zero means the pixel sits on the horizon of
    # the rectifying camera and would warp to infinity.
    if np.any(dz < HORIZON_EPS):
        raise GeometryError(
            f"plane {plane.id!r}: {int(np.count_nonzero(dz < HORIZON_EPS))} support "
            "pixels on or beyond the rectifying horizon"
        )
    u = rot[0] / dz
    v = rot[1] / dz
    umin, umax = float(u.min()), float(u.max())
    vmin, vmax = float(v.min()), float(v.max())
    eu, ev = umax - umin, vmax - vmin
    if eu < 1e-12 or ev < 1e-12:
        raise GeometryError(f"plane {plane.id!r}: support warps to a zero-area region")

    f_v = (target_long_side - 1) / max(eu, ev)
    K_v = np.array(
        [
            [f_v, 0.0, -f_v * umin],
            [0.0, f_v, -f_v * vmin],
            [0.0, 0.0, 1.0],
        ]
    )
    H = Homography.from_matrix(K_v @ R @ intrinsics.K_inv)
    rect_w = int(np.ceil(f_v * eu - 1e-9)) + 1
    rect_h = int(np.ceil(f_v * ev - 1e-9)) + 1
    return RectifiedFrame(
        plane_id=plane.id,
        h_orig_to_rect=H,
        rect_width=rect_w,
        rect_height=rect_h,
        pixels_per_meter=f_v / plane.offset,
        virtual_focal=f_v,
    )


def _backward_map(h: Homography, out_dims: tuple[int, int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Preimage coordinates (sx, sy) of every output pixel plus a finite-w flag."""
    w_out, h_out = out_dims
    Hinv = h.inverse().m
    xs, ys = np.meshgrid(np.arange(w_out, dtype=np.float64), np.arange(h_out, dtype=np.float64))
    denom = Hinv[2, 0] * xs + Hinv[2, 1] * ys + Hinv[2, 2]
    finite = np.abs(denom) > 1e-12
    safe = np.where(finite, denom, 1.0)
    sx = (Hinv[0, 0] * xs + Hinv[0, 1] * ys + Hinv[0, 2]) / safe
    sy = (Hinv[1, 0] * xs + Hinv[1, 1] * ys + Hinv[1, 2]) / safe
    return sx, sy, finite


def _bilinear(src: np.ndarray, sx: np.ndarray, sy: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Sample src (H, W[, C]) float64 at (sx, sy); invalid sites read as 0."""
    h, w = src.shape[:2]
    x0 = np.clip(np.floor(sx).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(sy).astype(np.int64), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = np.clip(sx - x0, 0.0, 1.0)
    fy = np.clip(sy - y0, 0.0, 1.0)
    if src.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    v00 = src[y0, x0]
    v01 = src[y0, x1]
    v10 = src[y1, x0]
    v11 = src[y1, x1]
    out = (
        v00 * (1 - fx) * (1 - fy)
        + v01 * fx * (1 - fy)
        + v10 * (1 - fx) * fy
        + v11 * fx * fy
    )
    out[~valid] = 0.0
    return out


def warp_image(
    src: np.ndarray, h: Homography, out_dims: tuple[int, int]
) -> tuple[np.ndarray, np.ndarray]:
    """Backward-warp an RGB image; h maps source coords to output coords.

    Returns (uint8 image, validity mask). Output pixels whose preimage falls
    outside the source pixel-center rectangle are black with validity 0;
    in-bounds pixels are bilinear samples, exact on pixel centers.
    """
    sx, sy, finite = _backward_map(h, out_dims)
    hh, ww = src.shape[:2]
    valid = finite & (sx >= 0) & (sx <= ww - 1) & (sy >= 0) & (sy <= hh - 1)
    out = _bilinear(src.astype(np.float64), sx, sy, valid)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8), valid


def warp_mask(src: np.ndarray, h: Homography, out_dims: tuple[int, int]) -> np.ndarray:
    """Warp a bool mask: bilinear-sample the 0/1 field, threshold at 0.5."""
    sx, sy, finite = _backward_map(h, out_dims)
    hh, ww = src.shape[:2]
    valid = finite & (sx >= 0) & (sx <= ww - 1) & (sy >= 0) & (sy <= hh - 1)
    field = _bilinear(src.astype(np.float64), sx, sy, valid)
    return field >= 0.5


def unknown_mask(frame: RectifiedFrame, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Rectified pixels with no preimage in the original image.

    Exactly the complement of warp_image's validity mask for this frame.
    """
    sx, sy, finite = _backward_map(frame.h_orig_to_rect, (frame.rect_width, frame.rect_height))
    w, h = intrinsics.width, intrinsics.height
    valid = finite & (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    return ~valid


def assign_masked_pixels(
    bundle: SceneBundle, inpaint_mask: np.ndarray
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Claim each masked pixel for the nearest plane whose support contains it.

    Depth along the pixel ray is t = offset / (n . K^-1 p); the smallest
    positive t wins, ties go to the earlier plane in bundle order. Unclaimed
    pixels form the residual. Claims plus residual partition the input mask.
    """
    h, w = bundle.intrinsics.height, bundle.intrinsics.width
    if inpaint_mask.shape != (h, w):
        raise GeometryError(f"inpaint mask shape {inpaint_mask.shape} != image dims {(h, w)}")
    claims = {p.id: np.zeros((h, w), dtype=bool) for p in bundle.planes}
    if not bundle.planes:
        return claims, inpaint_mask.copy()

    depth = np.full((len(bundle.planes), h, w), np.inf)
    for i, plane in enumerate(bundle.planes):
        t = plane_ray_depths(plane, bundle.intrinsics)
        t[~plane.support_mask] = np.inf
        depth[i] = t
    best = np.argmin(depth, axis=0)  # first minimum wins the tie
    best_depth = np.take_along_axis(depth, best[None], axis=0)[0]
    claimed = inpaint_mask & np.isfinite(best_depth)
    for i, plane in enumerate(bundle.planes):
        claims[plane.id] = claimed & (best == i)
    residual = inpaint_mask & ~claimed
    return claims, residual
