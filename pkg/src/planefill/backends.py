"""Inpainting backends behind one contract: unmasked pixels pass through bit-exact.

Three implementations: the PatchMatch completer (reference), a cheap
color-diffusion fill, and an adapter that shells out to an external command or
HTTP endpoint (the seam for neural models). Plus the per-channel histogram
matching post-process applied to filled regions.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adapters import AdapterConfig, post_http_adapter, run_command_adapter
from .errors import AdapterError, BackendError
from .imgio import decode_png_rgb, encode_png, read_rgb, write_mask, write_rgb
from .patchmatch import PatchMatchParams, _onion_peel_fill, patchmatch_inpaint


@dataclass
class InpaintRequest:
    image: np.ndarray  # uint8 (H, W, 3)
    mask: np.ndarray  # bool (H, W), 1 = fill

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.uint8)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.image.ndim != 3 or self.image.shape[2] != 3:
            raise ValueError(f"image must be (H, W, 3), got {self.image.shape}")
        if self.mask.shape != self.image.shape[:2]:
            raise ValueError(f"mask shape {self.mask.shape} != image dims {self.image.shape[:2]}")
        if self.mask.all():
            raise ValueError("mask covers every pixel; at least one known pixel required")


def diffusion_fill(request: InpaintRequest) -> np.ndarray:
    """Fill by 4-neighbor Jacobi averaging, seeded by onion-peel from the boundary.

    Sweeps stop when the largest per-pixel change drops below 0.5 intensity
    levels, capped at 10 * max(side) sweeps.
    """
    img = request.image
    hole = request.mask
    out = img.copy()
    if not hole.any():
        return out
    h, w = hole.shape
    ys, xs = np.nonzero(hole)
    y0, y1 = max(ys.min() - 1, 0), min(ys.max() + 2, h)
    x0, x1 = max(xs.min() - 1, 0), min(xs.max() + 2, w)
    crop = _onion_peel_fill(img[y0:y1, x0:x1].astype(np.float32), hole[y0:y1, x0:x1]).astype(np.float64)
    hole_c = hole[y0:y1, x0:x1]

    ch, cw = hole_c.shape
    hy, hx = np.nonzero(hole_c)
    # per-pixel count of in-image neighbors (boundary pixels of the full image
    # may have fewer than four)
    gy, gx = hy + y0, hx + x0
    counts = (
        (gy > 0).astype(np.float64)
        + (gy < h - 1)
        + (gx > 0)
        + (gx < w - 1)
    )
    max_sweeps = 10 * max(h, w)
    for _ in range(max_sweeps):
        padded = np.pad(crop, ((1, 1), (1, 1), (0, 0)), mode="edge")
        # edge-padding replicates the pixel itself outside the image; subtract
        # it so the average runs over true neighbors only
        total = (
            padded[:-2, 1:-1] + padded[2:, 1:-1] + padded[1:-1, :-2] + padded[1:-1, 2:]
        )
        self_pad = 4.0 - counts
        new_vals = (total[hy, hx] - crop[hy, hx] * self_pad[:, None]) / counts[:, None]
        delta = np.abs(new_vals - crop[hy, hx]).max()
        crop[hy, hx] = new_vals
        if delta < 0.5:
            break
    out[y0:y1, x0:x1][hole_c] = np.clip(np.rint(crop[hole_c]), 0, 255).astype(np.uint8)
    return out


def external_inpaint(request: InpaintRequest, adapter: AdapterConfig) -> np.ndarray:
    """Round-trip the request through an external command or HTTP endpoint.

    Command mode writes input.png and mask.png to a temp directory, substitutes
    {input} {mask} {output} into the template, and reads output.png back. The
    result is forced onto the inpaint contract by copying unmasked pixels from
    the input.
    """
    expected = request.image.shape
    if adapter.kind == "command":
        with tempfile.TemporaryDirectory(prefix="planefill-ext-") as td:
            tdir = Path(td)
            input_path = tdir / "input.png"
            mask_path = tdir / "mask.png"
            output_path = tdir / "output.png"
            write_rgb(input_path, request.image)
            write_mask(mask_path, request.mask)
            run_command_adapter(
                adapter, {"input": input_path, "mask": mask_path, "output": output_path}
            )
            if not output_path.is_file():
                raise AdapterError(f"adapter produced no output file {output_path}")
            result = read_rgb(output_path)
    else:
        body = post_http_adapter(
            adapter, {"input": encode_png(request.image), "mask": _mask_png(request.mask)}
        )
        try:
            result = decode_png_rgb(body)
        except Exception as e:
            raise AdapterError(f"http adapter returned undecodable image data: {e}") from e
    if result.shape != expected:
        raise AdapterError(
            f"adapter output is {result.shape[1]}x{result.shape[0]}, "
            f"expected {expected[1]}x{expected[0]}"
        )
    out = result.copy()
    out[~request.mask] = request.image[~request.mask]
    return out


def _mask_png(mask: np.ndarray) -> bytes:
    import io

    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def histogram_match(image: np.ndarray, target_mask: np.ndarray, reference_mask: np.ndarray) -> np.ndarray:
    """Remap target-mask pixels so each channel's histogram matches the reference.

    Rank-based (exact histogram specification): target pixels are sorted per
    channel with stable scan order and take the reference value at the same
    quantile, which keeps the remapping monotone. Pixels outside target_mask
    are untouched.
    """
    image = np.asarray(image, dtype=np.uint8)
    target_mask = np.asarray(target_mask, dtype=bool)
    reference_mask = np.asarray(reference_mask, dtype=bool)
    if not reference_mask.any():
        raise ValueError("reference mask is empty")
    out = image.copy()
    tvals = image[target_mask]
    if tvals.size == 0:
        return out
    rvals = image[reference_mask]
    n_t = tvals.shape[0]
    n_r = rvals.shape[0]
    mapped = np.empty_like(tvals)
    pos = (np.arange(n_t, dtype=np.int64) * n_r) // n_t
    for c in range(3):
        order = np.argsort(tvals[:, c], kind="stable")
        ref_sorted = np.sort(rvals[:, c])
        mapped[order, c] = ref_sorted[pos]
    out[target_mask] = mapped
    return out


class PatchMatchBackend:
    name = "patchmatch"

    def __init__(self, params: PatchMatchParams | None = None):
        self.params = params or PatchMatchParams()

    def with_seed(self, seed: int) -> "PatchMatchBackend":
        p = self.params
        return PatchMatchBackend(
            PatchMatchParams(
                patch_size=p.patch_size,
                em_iters=p.em_iters,
                nnf_iters=p.nnf_iters,
                search_decay=p.search_decay,
                min_pyramid_side=p.min_pyramid_side,
                seed=seed,
            )
        )

    def run(self, request: InpaintRequest) -> np.ndarray:
        return patchmatch_inpaint(request.image, request.mask, self.params)


class DiffusionBackend:
    name = "diffusion"

    def with_seed(self, seed: int) -> "DiffusionBackend":
        return self

    def run(self, request: InpaintRequest) -> np.ndarray:
        return diffusion_fill(request)


class ExternalBackend:
    name = "external"

    def __init__(self, adapter: AdapterConfig):
        self.adapter = adapter

    def with_seed(self, seed: int) -> "ExternalBackend":
        return self

    def run(self, request: InpaintRequest) -> np.ndarray:
        return external_inpaint(request, self.adapter)


def make_backend(config: dict):
    """Build a backend from its JSON config: {"kind": "patchmatch"|"diffusion"|"external", ...}."""
    kind = config.get("kind", "patchmatch")
    if kind == "patchmatch":
        params = PatchMatchParams(
            patch_size=int(config.get("patch_size", 7)),
            em_iters=int(config.get("em_iters", 8)),
            nnf_iters=int(config.get("nnf_iters", 5)),
            search_decay=float(config.get("search_decay", 0.5)),
            min_pyramid_side=config.get("min_pyramid_side"),
            seed=int(config.get("seed", 0)),
        )
        return PatchMatchBackend(params)
    if kind == "diffusion":
        return DiffusionBackend()
    if kind == "external":
        return ExternalBackend(AdapterConfig.from_dict(config.get("adapter", config)))
    raise BackendError(kind, "unknown backend kind")


def inpaint(request: InpaintRequest, backend) -> np.ndarray:
    """Run a backend under the inpaint contract.

    An empty mask returns the input untouched without invoking the backend.
    Whatever the backend produced, unmasked pixels are restored bit-exactly.
    """
    if not request.mask.any():
        return request.image.copy()
    try:
        result = backend.run(request)
    except (BackendError, AdapterError):
        raise
    except Exception as e:
        raise BackendError(getattr(backend, "name", "unknown"), str(e)) from e
    if result.shape != request.image.shape:
        raise BackendError(
            getattr(backend, "name", "unknown"),
            f"output dims {result.shape} != input {request.image.shape}",
        )
    out = result.copy()
    out[~request.mask] = request.image[~request.mask]
    return out
