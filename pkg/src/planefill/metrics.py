"""Removal-quality metrics and the ablation evaluation harness.

Incoherence measures edge structure the fill invented: blur and binarize the
ground-truth edge map, subtract it from the prediction's edge map, zero small
residuals, and average over the masked pixels. Edge maps are plain float arrays
in [0,1] from a normalized Sobel detector (external maps can be injected for
parity with learned detectors). PSNR and an external-process LPIPS adapter
round out the protocol; evaluate() runs methods over a dataset of ground-truth
images plus synthetic masks and emits CSV/JSON reports with a summary figure.
"""

from __future__ import annotations

import csv
import json
import math
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .adapters import AdapterConfig, post_http_adapter, run_command_adapter
from .errors import AdapterError
from .imgio import encode_png, read_gray01, read_mask

# analytic maximum of the 3x3 Sobel magnitude on 8-bit input: |gx| and |gy|
# each reach 4*255, jointly at most 4*sqrt(2)*255
_SOBEL_MAX = 4.0 * math.sqrt(2.0) * 255.0
_KX = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])


@dataclass
class IncoherenceParams:
    gt_enhance_threshold: float = 0.1
    residual_threshold: float = 0.01
    blur_sigma: float = 2.0
    edge_detector: str = "sobel"

    def __post_init__(self):
        if not 0.0 < self.gt_enhance_threshold < 1.0:
            raise ValueError(f"gt_enhance_threshold must be in (0, 1), got {self.gt_enhance_threshold}")
        if not 0.0 <= self.residual_threshold < 1.0:
            raise ValueError(f"residual_threshold must be in [0, 1), got {self.residual_threshold}")
        if self.blur_sigma <= 0.0:
            raise ValueError(f"blur_sigma must be > 0, got {self.blur_sigma}")
        if self.edge_detector not in ("sobel", "external"):
            raise ValueError(f"edge_detector must be 'sobel' or 'external', got {self.edge_detector!r}")

    def to_dict(self) -> dict:
        return {
            "gt_enhance_threshold": self.gt_enhance_threshold,
            "residual_threshold": self.residual_threshold,
            "blur_sigma": self.blur_sigma,
            "edge_detector": self.edge_detector,
        }


def edge_map(image: np.ndarray, detector="sobel") -> np.ndarray:
    """Edge probability in [0,1]: normalized Sobel, or a grayscale PNG to load.

    detector is either "sobel" or a path to an externally computed map whose
    dims must match the image.
    """
    image = np.asarray(image)
    if detector == "sobel":
        if image.ndim == 3:
            gray = image[..., 0] * 0.299 + image[..., 1] * 0.587 + image[..., 2] * 0.114
        else:
            gray = image.astype(np.float64)
        gx = ndimage.correlate(gray.astype(np.float64), _KX, mode="nearest")
        gy = ndimage.correlate(gray.astype(np.float64), _KX.T, mode="nearest")
        mag = np.sqrt(gx * gx + gy * gy) / _SOBEL_MAX
        return np.clip(mag, 0.0, 1.0)
    path = Path(detector)
    if not path.is_file():
        raise ValueError(f"external edge map not found: {path}")
    loaded = read_gray01(path)
    if loaded.shape != image.shape[:2]:
        raise ValueError(f"external edge map dims {loaded.shape} != image dims {image.shape[:2]}")
    return loaded


def incoherence_from_edge_maps(
    edge_gt: np.ndarray,
    edge_pred: np.ndarray,
    inpaint_mask: np.ndarray,
    params: IncoherenceParams | None = None,
) -> float:
    """The incoherence core, detector-agnostic.

    edge_gt is blurred (sigma params.blur_sigma, kernel radius ceil(3*sigma),
    replicate border), values above the enhance threshold snap to 1, the
    difference edge_pred - edge_gt is zeroed at or below the residual
    threshold, and the result is averaged over mask pixels.
    """
    params = params or IncoherenceParams()
    mask = np.asarray(inpaint_mask, dtype=bool)
    if edge_gt.shape != edge_pred.shape or edge_gt.shape != mask.shape:
        raise ValueError("edge maps and mask must share dims")
    if not mask.any():
        raise ValueError("inpaint mask is empty")
    radius = int(math.ceil(3.0 * params.blur_sigma))
    blurred = ndimage.gaussian_filter(
        edge_gt.astype(np.float64), params.blur_sigma, mode="nearest", radius=radius
    )
    blurred = np.where(blurred > params.gt_enhance_threshold, 1.0, blurred)
    imask = edge_pred.astype(np.float64) - blurred
    imask = np.where(imask <= params.residual_threshold, 0.0, imask)
    return float(imask[mask].mean())


def incoherence(
    image_gt: np.ndarray,
    image_pred: np.ndarray,
    inpaint_mask: np.ndarray,
    params: IncoherenceParams | None = None,
    edge_gt: np.ndarray | None = None,
    edge_pred: np.ndarray | None = None,
) -> float:
    """Incoherence of a fill vs ground truth over the masked region.

    Pass edge_gt/edge_pred to use externally computed maps; otherwise they are
    derived with the Sobel detector.
    """
    params = params or IncoherenceParams()
    if image_gt.shape != image_pred.shape:
        raise ValueError(f"image dims differ: {image_gt.shape} vs {image_pred.shape}")
    if edge_gt is None:
        edge_gt = edge_map(image_gt, "sobel")
    if edge_pred is None:
        edge_pred = edge_map(image_pred, "sobel")
    return incoherence_from_edge_maps(edge_gt, edge_pred, inpaint_mask, params)


def psnr(image_gt: np.ndarray, image_pred: np.ndarray, region: np.ndarray | None = None) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical inputs."""
    if image_gt.shape != image_pred.shape:
        raise ValueError(f"image dims differ: {image_gt.shape} vs {image_pred.shape}")
    a = image_gt.astype(np.float64)
    b = image_pred.astype(np.float64)
    if region is not None:
        region = np.asarray(region, dtype=bool)
        if region.shape != image_gt.shape[:2]:
            raise ValueError(f"region dims {region.shape} != image dims {image_gt.shape[:2]}")
        if not region.any():
            raise ValueError("region is empty")
        a, b = a[region], b[region]
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * math.log10(255.0 * 255.0 / mse)


_FLOAT_RE = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


def lpips_external(image_gt: np.ndarray, image_pred: np.ndarray, adapter: AdapterConfig) -> float:
    """Run an external LPIPS scorer over the image pair and parse its float."""
    if adapter.kind == "command":
        with tempfile.TemporaryDirectory(prefix="planefill-lpips-") as td:
            tdir = Path(td)
            gt_path = tdir / "gt.png"
            pred_path = tdir / "pred.png"
            gt_path.write_bytes(encode_png(image_gt))
            pred_path.write_bytes(encode_png(image_pred))
            out = run_command_adapter(adapter, {"gt": gt_path, "pred": pred_path})
        body = out.decode("utf-8", errors="replace") if isinstance(out, bytes) else out
    else:
        raw = post_http_adapter(adapter, {"gt": encode_png(image_gt), "pred": encode_png(image_pred)})
        body = raw.decode("utf-8", errors="replace")
    stripped = body.strip()
    try:
        return float(stripped)
    except ValueError:
        pass
    match = _FLOAT_RE.search(stripped)
    if match is None:
        raise AdapterError(f"LPIPS adapter output is not a float: {stripped!r}")
    return float(match.group(0))


def synthesize_test_masks(dims: tuple[int, int], source, seed: int = 0) -> list[np.ndarray]:
    """Generate removal masks: placed silhouettes or random ellipse blobs.

    Generator mode (dict with count/coverage_min/coverage_max): each mask is a
    union of 3-8 ellipses whose size is bisected until coverage lands in range.
    Silhouette mode (dict with silhouettes + count, optional scale_min/max):
    each silhouette is scaled and dropped uniformly at random fully in frame.
    Deterministic under seed.
    """
    h, w = int(dims[0]), int(dims[1])
    rng = np.random.default_rng(seed)
    if not isinstance(source, dict):
        raise ValueError("source must be a dict of generator or silhouette params")
    if "silhouettes" in source:
        return _silhouette_masks(h, w, source, rng)
    return _blob_masks(h, w, source, rng)


def _load_silhouette(item) -> np.ndarray:
    if isinstance(item, np.ndarray):
        return item.astype(bool)
    return read_mask(item)


def _silhouette_masks(h: int, w: int, source: dict, rng) -> list[np.ndarray]:
    sils = [_load_silhouette(s) for s in source["silhouettes"]]
    count = int(source.get("count", len(sils)))
    scale_min = float(source.get("scale_min", 1.0))
    scale_max = float(source.get("scale_max", 1.0))
    masks = []
    for i in range(count):
        sil = sils[int(rng.integers(0, len(sils)))]
        scale = float(rng.uniform(scale_min, scale_max))
        sh = max(1, int(round(sil.shape[0] * scale)))
        sw = max(1, int(round(sil.shape[1] * scale)))
        if sh > h or sw > w:
            raise ValueError(
                f"silhouette {sil.shape} at scale {scale:.3f} exceeds frame {(h, w)}"
            )
        if (sh, sw) != sil.shape:
            from PIL import Image

            img = Image.fromarray(sil.astype(np.uint8) * 255, mode="L")
            sil = np.asarray(img.resize((sw, sh), Image.NEAREST)) >= 128
        y0 = int(rng.integers(0, h - sh + 1))
        x0 = int(rng.integers(0, w - sw + 1))
        mask = np.zeros((h, w), dtype=bool)
        mask[y0 : y0 + sh, x0 : x0 + sw] = sil
        masks.append(mask)
    return masks


def _ellipse_union(h: int, w: int, ellipses: np.ndarray, scale: float) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    mask = np.zeros((h, w), dtype=bool)
    for cy, cx, ry, rx, theta in ellipses:
        ct, st = math.cos(theta), math.sin(theta)
        dx = xx - cx
        dy = yy - cy
        u = dx * ct + dy * st
        v = -dx * st + dy * ct
        mask |= (u / (rx * scale)) ** 2 + (v / (ry * scale)) ** 2 <= 1.0
    return mask


def _blob_masks(h: int, w: int, source: dict, rng) -> list[np.ndarray]:
    count = int(source["count"])
    cov_min = float(source["coverage_min"])
    cov_max = float(source["coverage_max"])
    if not (0.0 < cov_min <= cov_max < 0.9):
        raise ValueError(f"coverage range ({cov_min}, {cov_max}) must lie within (0, 0.9)")
    total = h * w
    masks = []
    for i in range(count):
        n_ell = int(rng.integers(3, 9))
        base = min(h, w)
        ellipses = np.column_stack(
            [
                rng.uniform(0.2 * h, 0.8 * h, n_ell),
                rng.uniform(0.2 * w, 0.8 * w, n_ell),
                rng.uniform(0.08 * base, 0.3 * base, n_ell),
                rng.uniform(0.08 * base, 0.3 * base, n_ell),
                rng.uniform(0.0, math.pi, n_ell),
            ]
        )
        # coverage grows monotonically with the shared radius multiplier;
        # bisect it into the requested band
        lo, hi = 1e-3, 6.0
        mask = None
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            cand = _ellipse_union(h, w, ellipses, mid)
            cov = cand.sum() / total
            if cov < cov_min:
                lo = mid
            elif cov > cov_max:
                hi = mid
            else:
                mask = cand
                break
        if mask is None:
            raise ValueError(
                f"could not reach coverage in [{cov_min}, {cov_max}] for mask {i}"
            )
        masks.append(mask)
    return masks


@dataclass
class EvalRecord:
    scene_id: str
    method: str
    incoherence: float
    psnr: float
    mask_coverage: float
    lpips: float | None = None


@dataclass
class EvalReport:
    records: list
    means: dict
    failures: list
    dataset: str
    config: dict = field(default_factory=dict)


def _blank_masked(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = image.copy()
    out[mask] = 0
    return out


def _run_method(method: dict, scene_dir: Path, gt: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Produce the method's prediction; non-identity methods never see masked pixels."""
    from .backends import InpaintRequest, inpaint, make_backend
    from .pipeline import PipelineConfig, erase_mask
    from .scene import load_scene

    kind = method.get("kind", "backend")
    if kind == "identity":
        return gt.copy()
    blanked = _blank_masked(gt, mask)
    if kind == "backend":
        backend = make_backend(method.get("backend", {"kind": "patchmatch"}))
        if "seed" in method:
            backend = backend.with_seed(int(method["seed"]))
        return inpaint(InpaintRequest(blanked, mask), backend)
    if kind == "pipeline":
        manifest = scene_dir / "scene.json"
        if not manifest.is_file():
            raise ValueError(f"method requires plane layout but {manifest} is missing")
        bundle = load_scene(scene_dir)
        if bundle.image.shape != gt.shape:
            raise ValueError("scene bundle image dims differ from ground truth")
        bundle.image = blanked
        config = PipelineConfig.from_dict(method.get("config", {}))
        return erase_mask(bundle, mask, config).final_image
    raise ValueError(f"unknown method kind {kind!r}")


def _mean(values: list[float]) -> float | None:
    if not values:
        return None
    return float(np.mean(values))


def evaluate(
    dataset_dir: str | Path,
    methods: list[dict],
    params: IncoherenceParams | None = None,
    adapter: AdapterConfig | None = None,
    report_dir: str | Path | None = None,
    psnr_region: str = "full",
) -> EvalReport:
    """Run every method over every (scene, mask) pair and aggregate per-method means.

    Methods are dicts: {"label", "kind": "identity"|"backend"|"pipeline", ...}.
    Ground-truth pixels under the mask are blanked before any non-identity
    method runs, so fills cannot peek at the answer. Per-case failures are
    recorded and excluded from means. With report_dir set, writes report.csv,
    report.json and report.png there.
    """
    params = params or IncoherenceParams()
    if psnr_region not in ("full", "mask"):
        raise ValueError(f"psnr_region must be 'full' or 'mask', got {psnr_region!r}")
    root = Path(dataset_dir)
    if not root.is_dir():
        raise ValueError(f"dataset directory not found: {root}")
    scene_dirs = sorted(p for p in root.iterdir() if p.is_dir() and (p / "image.png").is_file())
    if not scene_dirs:
        raise ValueError(f"no scenes with image.png under {root}")
    from .imgio import read_rgb

    records: list[EvalRecord] = []
    failures: list[dict] = []
    for scene_dir in scene_dirs:
        gt = read_rgb(scene_dir / "image.png")
        mask_paths = sorted((scene_dir / "masks").glob("*.png"))
        if not mask_paths:
            failures.append({"scene_id": scene_dir.name, "method": "*", "error": "no masks/*.png"})
            continue
        gt_edges = edge_map(gt, "sobel")
        for mask_path in mask_paths:
            mask = read_mask(mask_path)
            if mask.shape != gt.shape[:2]:
                failures.append(
                    {
                        "scene_id": f"{scene_dir.name}/{mask_path.stem}",
                        "method": "*",
                        "error": f"mask dims {mask.shape} != image dims {gt.shape[:2]}",
                    }
                )
                continue
            coverage = float(mask.sum()) / mask.size
            case_id = f"{scene_dir.name}/{mask_path.stem}"
            for method in methods:
                label = method["label"]
                try:
                    pred = _run_method(method, scene_dir, gt, mask)
                    inc = incoherence_from_edge_maps(gt_edges, edge_map(pred, "sobel"), mask, params)
                    snr = psnr(gt, pred, mask if psnr_region == "mask" else None)
                    lp = lpips_external(gt, pred, adapter) if adapter is not None else None
                    records.append(
                        EvalRecord(
                            scene_id=case_id,
                            method=label,
                            incoherence=inc,
                            psnr=snr,
                            mask_coverage=coverage,
                            lpips=lp,
                        )
                    )
                except Exception as e:
                    failures.append({"scene_id": case_id, "method": label, "error": str(e)})
    means = {}
    for method in methods:
        label = method["label"]
        mine = [r for r in records if r.method == label]
        means[label] = {
            "lpips": _mean([r.lpips for r in mine if r.lpips is not None]),
            "incoherence": _mean([r.incoherence for r in mine]),
            "psnr": _mean([r.psnr for r in mine]),
            "count": len(mine),
            "failures": sum(1 for f in failures if f["method"] == label),
        }
    report = EvalReport(
        records=records,
        means=means,
        failures=failures,
        dataset=str(root),
        config={
            "methods": methods,
            "params": params.to_dict(),
            "psnr_region": psnr_region,
            "lpips_adapter": adapter is not None,
        },
    )
    if report_dir is not None:
        write_report(report, report_dir)
    return report


def write_report(report: EvalReport, out_dir: str | Path) -> None:
    """Emit report.csv (per record), report.json (means), and a summary figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["scene_id", "method", "lpips", "incoherence", "psnr", "coverage"])
        for r in report.records:
            writer.writerow(
                [
                    r.scene_id,
                    r.method,
                    "" if r.lpips is None else repr(r.lpips),
                    repr(r.incoherence),
                    repr(r.psnr),
                    repr(r.mask_coverage),
                ]
            )
    payload = {
        "dataset": report.dataset,
        "config": report.config,
        "means": report.means,
        "failures": report.failures,
        "n_records": len(report.records),
    }
    with open(out / "report.json", "w") as f:
        json.dump(payload, f, indent=2)
    from .report_plots import render_report_figure

    render_report_figure(report, out / "report.png")
