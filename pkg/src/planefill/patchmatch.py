"""Multiscale PatchMatch image completion.

Coarse-to-fine EM synthesis: a Gaussian pyramid is built down to a minimum
side, the hole at the coarsest level is seeded by onion-peel averaging, and
each level alternates nearest-neighbor-field search with distance-weighted
patch voting. The NNF search is the classic scheme: scan-order propagation of
neighbor offsets plus exponentially decaying random search, accepting a
candidate only when it lowers the patch SSD, so per-pixel distances never
increase within a search call.

All randomness comes from an explicit xorshift64* generator seeded from the
params, sampled in scan order; runs are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import ndimage

from .errors import BackendError
from .geometry import _bilinear

_MASK64 = 0xFFFFFFFFFFFFFFFF
_PYR_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


@dataclass
class PatchMatchParams:
    patch_size: int = 7
    em_iters: int = 8
    nnf_iters: int = 5
    search_decay: float = 0.5
    min_pyramid_side: int | None = None  # defaults to 2 * patch_size
    seed: int = 0

    def __post_init__(self):
        if self.patch_size < 3 or self.patch_size % 2 == 0:
            raise ValueError(f"patch_size must be odd and >= 3, got {self.patch_size}")
        if not (0.0 < self.search_decay < 1.0):
            raise ValueError(f"search_decay must be in (0, 1), got {self.search_decay}")
        if self.em_iters < 1 or self.nnf_iters < 1:
            raise ValueError("iteration counts must be >= 1")

    @property
    def min_side(self) -> int:
        return 2 * self.patch_size if self.min_pyramid_side is None else self.min_pyramid_side


@dataclass
class NNField:
    """Per-pixel (dx, dy) offsets into the source region plus patch SSD.

    Entries are meaningful only where `targets` is set; distance is +inf
    elsewhere. sweep_mean_distance records the mean target distance after each
    propagation/search sweep (non-increasing by construction).
    """

    offsets: np.ndarray  # (H, W, 2) int32, [..., 0] = dx, [..., 1] = dy
    distance: np.ndarray  # (H, W) float64
    targets: np.ndarray  # bool (H, W)
    sweep_mean_distance: list[float] = field(default_factory=list)


def _mix_seed(seed: int, salt: int) -> int:
    """splitmix64 step; derives independent stream seeds, never returns 0."""
    x = (seed + 0x9E3779B97F4A7C15 * (salt + 1)) & _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x or 0x9E3779B97F4A7C15


@njit(cache=True)
def _rand_below(state, n):
    # xorshift64*; state is a 1-element uint64 array
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    return np.int64((x * np.uint64(0x2545F4914F6CDD1D)) % np.uint64(n))


@njit(cache=True)
def _patch_ssd(img, ty, tx, sy, sx, r, best):
    # RGB sum of squared differences; bails out once the partial sum passes best
    acc = 0.0
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            for c in range(3):
                d = img[ty + dy, tx + dx, c] - img[sy + dy, sx + dx, c]
                acc += d * d
        if acc >= best:
            return acc
    return acc


@njit(cache=True)
def _nnf_init(img, valid_src, targets, src_ys, src_xs, off_dx, off_dy, dist, seed_ok, r, state):
    H, W = targets.shape
    n_src = src_ys.size
    for y in range(H):
        for x in range(W):
            if not targets[y, x]:
                continue
            use_seed = False
            if seed_ok[y, x]:
                sy = y + off_dy[y, x]
                sx = x + off_dx[y, x]
                if 0 <= sy < H and 0 <= sx < W and valid_src[sy, sx]:
                    use_seed = True
            if not use_seed:
                k = _rand_below(state, n_src)
                sy = src_ys[k]
                sx = src_xs[k]
                off_dy[y, x] = sy - y
                off_dx[y, x] = sx - x
            dist[y, x] = _patch_ssd(img, y, x, sy, sx, r, np.inf)


@njit(cache=True)
def _nnf_sweeps(img, valid_src, targets, off_dx, off_dy, dist, iters, w0, decay, r, state):
    H, W = targets.shape
    means = np.zeros(iters)
    n_targets = 0
    for y in range(H):
        for x in range(W):
            if targets[y, x]:
                n_targets += 1
    for sweep in range(iters):
        step = 1 if sweep % 2 == 0 else -1
        y0 = 0 if step == 1 else H - 1
        x0 = 0 if step == 1 else W - 1
        y = y0
        while 0 <= y < H:
            x = x0
            while 0 <= x < W:
                if targets[y, x]:
                    bd = dist[y, x]
                    bdx = off_dx[y, x]
                    bdy = off_dy[y, x]
                    # propagation: adopt the offset of the scan neighbors visited
                    # earlier in this sweep
                    for k in range(2):
                        ny = y - step if k == 0 else y
                        nx = x if k == 0 else x - step
                        if 0 <= ny < H and 0 <= nx < W and targets[ny, nx]:
                            cdx = off_dx[ny, nx]
                            cdy = off_dy[ny, nx]
                            if cdx == bdx and cdy == bdy:
                                continue
                            sy = y + cdy
                            sx = x + cdx
                            if 0 <= sy < H and 0 <= sx < W and valid_src[sy, sx]:
                                d = _patch_ssd(img, y, x, sy, sx, r, bd)
                                if d < bd:
                                    bd, bdx, bdy = d, cdx, cdy
                    # random search around the current best, radius w0 * decay^i
                    rad = w0
                    while rad >= 1.0:
                        ri = np.int64(rad)
                        dy = _rand_below(state, 2 * ri + 1) - ri
                        dx = _rand_below(state, 2 * ri + 1) - ri
                        sy = y + bdy + dy
                        sx = x + bdx + dx
                        if 0 <= sy < H and 0 <= sx < W and valid_src[sy, sx]:
                            d = _patch_ssd(img, y, x, sy, sx, r, bd)
                            if d < bd:
                                bd = d
                                bdx = sx - x
                                bdy = sy - y
                        rad *= decay
                    dist[y, x] = bd
                    off_dx[y, x] = bdx
                    off_dy[y, x] = bdy
                x += step
            y += step
        total = 0.0
        for y in range(H):
            for x in range(W):
                if targets[y, x]:
                    total += dist[y, x]
        means[sweep] = total / n_targets
    return means


@njit(cache=True)
def _vote(img, targets, fill, off_dx, off_dy, dist, r, sigma):
    H, W = targets.shape
    accum = np.zeros((H, W, 3))
    wsum = np.zeros((H, W))
    inv = 1.0 / (2.0 * sigma * sigma)
    for y in range(H):
        for x in range(W):
            if not targets[y, x]:
                continue
            wgt = math.exp(-dist[y, x] * inv)
            sy0 = y + off_dy[y, x]
            sx0 = x + off_dx[y, x]
            for dy in range(-r, r + 1):
                py = y + dy
                if py < 0 or py >= H:
                    continue
                for dx in range(-r, r + 1):
                    px = x + dx
                    if px < 0 or px >= W:
                        continue
                    if fill[py, px]:
                        accum[py, px, 0] += wgt * img[sy0 + dy, sx0 + dx, 0]
                        accum[py, px, 1] += wgt * img[sy0 + dy, sx0 + dx, 1]
                        accum[py, px, 2] += wgt * img[sy0 + dy, sx0 + dx, 2]
                        wsum[py, px] += wgt
    out = img.copy()
    for y in range(H):
        for x in range(W):
            if fill[y, x] and wsum[y, x] > 0.0:
                out[y, x, 0] = accum[y, x, 0] / wsum[y, x]
                out[y, x, 1] = accum[y, x, 1] / wsum[y, x]
                out[y, x, 2] = accum[y, x, 2] / wsum[y, x]
    return out


def _valid_sources(hole: np.ndarray, patch_size: int) -> np.ndarray:
    """Centers whose full patch lies inside the image and the known region."""
    known = (~hole).astype(np.uint8)
    return ndimage.minimum_filter(known, size=patch_size, mode="constant", cval=0).astype(bool)


def _target_band(hole: np.ndarray, patch_size: int) -> np.ndarray:
    """Centers with a fully in-bounds patch overlapping the hole."""
    r = patch_size // 2
    overlap = ndimage.maximum_filter(hole.astype(np.uint8), size=patch_size, mode="constant", cval=0)
    band = np.zeros_like(hole)
    if hole.shape[0] > 2 * r and hole.shape[1] > 2 * r:
        band[r : hole.shape[0] - r, r : hole.shape[1] - r] = True
    return overlap.astype(bool) & band


def nnf_search(
    image: np.ndarray,
    known: np.ndarray,
    targets: np.ndarray,
    params: PatchMatchParams,
    init: NNField | None = None,
    seed: int | None = None,
) -> NNField:
    """Approximate nearest-neighbor field from target patches into the known region.

    Targets outside the fully-in-bounds patch band are dropped. A provided init
    is kept per pixel only where its offset still lands on a valid source
    patch; everything else is randomized.
    """
    img = np.ascontiguousarray(image, dtype=np.float32)
    r = params.patch_size // 2
    H, W = img.shape[:2]
    hole = ~np.asarray(known, dtype=bool)
    valid_src = _valid_sources(hole, params.patch_size)
    src_ys, src_xs = np.nonzero(valid_src)
    if src_ys.size == 0:
        raise BackendError("patchmatch", "no valid patch placement in the known region")

    band = np.zeros((H, W), dtype=bool)
    if H > 2 * r and W > 2 * r:
        band[r : H - r, r : W - r] = True
    tgt = np.asarray(targets, dtype=bool) & band

    off = np.zeros((H, W, 2), dtype=np.int32)
    dist = np.full((H, W), np.inf)
    result = NNField(offsets=off, distance=dist, targets=tgt)
    if not tgt.any():
        return result

    seed_ok = np.zeros((H, W), dtype=bool)
    if init is not None:
        off[...] = init.offsets
        seed_ok = init.targets & tgt

    state = np.array([_mix_seed(params.seed if seed is None else seed, 0)], dtype=np.uint64)
    _nnf_init(
        img, valid_src, tgt, src_ys.astype(np.int64), src_xs.astype(np.int64),
        off[..., 0], off[..., 1], dist, seed_ok, r, state,
    )
    means = _nnf_sweeps(
        img, valid_src, tgt, off[..., 0], off[..., 1], dist,
        params.nnf_iters, float(max(H, W)), params.search_decay, r, state,
    )
    result.sweep_mean_distance = [float(m) for m in means]
    return result


def _blur5(a: np.ndarray) -> np.ndarray:
    out = ndimage.correlate1d(a, _PYR_KERNEL, axis=0, mode="nearest")
    return ndimage.correlate1d(out, _PYR_KERNEL, axis=1, mode="nearest")


def _downsample(img: np.ndarray, hole: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Halve one pyramid level: known-weighted Gaussian blur for the image,
    conservative 2x2 max-pool for the hole mask."""
    wk = (~hole).astype(np.float64)
    num = _blur5(img.astype(np.float64) * wk[..., None])
    den = _blur5(wk)
    smooth = np.where(den[..., None] > 1e-8, num / np.maximum(den[..., None], 1e-8), img)
    img2 = smooth[::2, ::2].astype(np.float32)

    H, W = hole.shape
    H2, W2 = (H + 1) // 2, (W + 1) // 2
    padded = np.zeros((H2 * 2, W2 * 2), dtype=bool)
    padded[:H, :W] = hole
    hole2 = padded.reshape(H2, 2, W2, 2).any(axis=(1, 3))
    return img2, hole2


def _resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w = img.shape[:2]
    ys = np.linspace(0.0, in_h - 1.0, out_h)
    xs = np.linspace(0.0, in_w - 1.0, out_w)
    sx, sy = np.meshgrid(xs, ys)
    return _bilinear(img.astype(np.float64), sx, sy, np.ones_like(sx, dtype=bool))


_EIGHT = np.ones((3, 3), dtype=bool)


def _onion_peel_fill(img: np.ndarray, hole: np.ndarray) -> np.ndarray:
    """Fill the hole inward layer by layer, each peel pixel taking the mean of
    its known-or-already-filled 8-neighbors."""
    out = img.astype(np.float64).copy()
    remaining = hole.copy()
    while remaining.any():
        boundary = remaining & ndimage.binary_dilation(~remaining, structure=_EIGHT)
        if not boundary.any():
            break
        avail = (~remaining).astype(np.float64)
        padded_v = np.pad(out * avail[..., None], ((1, 1), (1, 1), (0, 0)))
        padded_w = np.pad(avail, 1)
        acc = np.zeros_like(out)
        cnt = np.zeros_like(avail)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dy == 0 and dx == 0:
                    continue
                acc += padded_v[1 + dy : 1 + dy + out.shape[0], 1 + dx : 1 + dx + out.shape[1]]
                cnt += padded_w[1 + dy : 1 + dy + out.shape[0], 1 + dx : 1 + dx + out.shape[1]]
        ys, xs = np.nonzero(boundary)
        out[ys, xs] = acc[ys, xs] / cnt[ys, xs, None]
        remaining[boundary] = False
    return out.astype(np.float32)


def patchmatch_inpaint(image: np.ndarray, mask: np.ndarray, params: PatchMatchParams | None = None) -> np.ndarray:
    """Complete the masked region of an RGB image; unmasked pixels stay bit-exact.

    The pyramid descends while the next level still holds at least one valid
    source patch, so very large holes simply stop coarsening early instead of
    failing.
    """
    if params is None:
        params = PatchMatchParams()
    img0 = np.asarray(image)
    hole0 = np.asarray(mask, dtype=bool)
    if img0.shape[:2] != hole0.shape:
        raise BackendError("patchmatch", f"image {img0.shape[:2]} vs mask {hole0.shape} dims")
    if not hole0.any():
        return img0.astype(np.uint8).copy()
    if hole0.all():
        raise BackendError("patchmatch", "mask covers the whole image")

    levels: list[tuple[np.ndarray, np.ndarray]] = [(img0.astype(np.float32), hole0)]
    if not _valid_sources(hole0, params.patch_size).any():
        raise BackendError("patchmatch", "no valid patch placement at the finest level")
    while True:
        img_l, hole_l = levels[-1]
        if min(img_l.shape[:2]) < 2 * params.min_side:
            break
        img_n, hole_n = _downsample(img_l, hole_l)
        if min(img_n.shape[:2]) < params.min_side:
            break
        if not _valid_sources(hole_n, params.patch_size).any():
            break
        levels.append((img_n, hole_n))

    r = params.patch_size // 2
    sigma = 0.5 * params.patch_size * 255.0
    salt = 1
    working = None
    nnf: NNField | None = None
    for li in range(len(levels) - 1, -1, -1):
        img_l, hole_l = levels[li]
        H, W = img_l.shape[:2]
        if working is None:
            working = _onion_peel_fill(img_l, hole_l)
        else:
            up = _resize_bilinear(working, H, W).astype(np.float32)
            working = img_l.copy()
            working[hole_l] = up[hole_l]
            if nnf is not None:
                nnf = _upsample_nnf(nnf, H, W)
        if not hole_l.any():
            nnf = None
            continue
        targets = _target_band(hole_l, params.patch_size)
        for em in range(params.em_iters):
            nnf = nnf_search(
                working, ~hole_l, targets, params, init=nnf,
                seed=_mix_seed(params.seed, salt),
            )
            salt += 1
            working = _vote(
                working, nnf.targets, hole_l, nnf.offsets[..., 0], nnf.offsets[..., 1],
                nnf.distance, r, sigma,
            )

    out = img0.astype(np.uint8).copy()
    out[hole0] = np.clip(np.rint(working[hole0]), 0, 255).astype(np.uint8)
    return out


def _upsample_nnf(nnf: NNField, out_h: int, out_w: int) -> NNField:
    """Seed a finer level: parent offsets doubled; validity re-checked downstream."""
    ch, cw = nnf.targets.shape
    ys = np.minimum(np.arange(out_h) // 2, ch - 1)
    xs = np.minimum(np.arange(out_w) // 2, cw - 1)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    offsets = (nnf.offsets[yy, xx] * 2).astype(np.int32)
    targets = nnf.targets[yy, xx]
    return NNField(offsets=offsets, distance=np.full((out_h, out_w), np.inf), targets=targets)
