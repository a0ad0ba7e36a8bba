"""Batch command-line interface.

Exit codes: 0 success, 1 input/validation error (including bad flags), 2
runtime failure. All diagnostics go to stderr; stdout carries only results.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .adapters import AdapterConfig
from .errors import AdapterError, BackendError, GeometryError, PipelineError, PlanefillError, SceneError
from .imgio import read_mask, read_rgb, write_mask, write_rgb


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage by default; the contract reserves 2 for
    # runtime failures
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="planefill", description="plane-aware object removal for indoor scenes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("erase", parents=[], help="remove selected instances from a scene")
    p.add_argument("--scene", required=True, help="scene bundle directory")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--select", help="comma-separated instance ids")
    group.add_argument("--all", action="store_true", help="remove every instance")
    p.add_argument("--config", help="pipeline config JSON path")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--dump", help="directory for per-plane debug artifacts")

    p = sub.add_parser("evaluate", help="run methods over a dataset and write a report")
    p.add_argument("--dataset", required=True)
    p.add_argument("--methods", required=True, help="JSON file: list of method configs")
    p.add_argument("--report", required=True, help="output directory for report.csv/json/png")
    p.add_argument("--params", help="incoherence params JSON path")
    p.add_argument("--psnr-region", choices=["full", "mask"], default="full")
    p.add_argument("--lpips-adapter", help="LPIPS adapter config JSON path")

    p = sub.add_parser("rectify", help="write one plane's fronto-parallel view")
    p.add_argument("--scene", required=True)
    p.add_argument("--plane", required=True)
    p.add_argument("--out", required=True, help="rectified image path; sidecars derive from it")
    p.add_argument("--target-long-side", type=int, default=512)

    p = sub.add_parser("metrics", help="score a prediction against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--psnr-region", choices=["full", "mask"], default="full")

    p = sub.add_parser("serve", help="serve the interactive erase API for one scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--config", help="pipeline config JSON path")
    p.add_argument("--frontend", help="static directory to host at /")

    p = sub.add_parser("inpaint", help="fill a masked region of a single image")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--backend", help="backend config JSON path")

    p = sub.add_parser("demo", help="write a synthetic demo scene bundle")
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, default=240)
    p.add_argument("--height", type=int, default=180)
    return parser


def _load_json(path: str, what: str) -> dict | list:
    p = Path(path)
    if not p.is_file():
        raise CliValidationError(f"{what} file not found: {p}")
    try:
        with open(p) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise CliValidationError(f"invalid JSON in {what} file {p}: {e}") from e


class CliValidationError(Exception):
    pass


def _pipeline_config(path: str | None):
    from .pipeline import PipelineConfig

    if path is None:
        return PipelineConfig()
    data = _load_json(path, "pipeline config")
    try:
        return PipelineConfig.from_dict(data)
    except (ValueError, TypeError) as e:
        raise CliValidationError(f"bad pipeline config: {e}") from e


def _cmd_erase(args) -> int:
    from . import pipeline
    from .scene import load_scene

    bundle = load_scene(args.scene)
    config = _pipeline_config(args.config)
    if args.all:
        selected = pipeline.ALL
    else:
        selected = [s for s in args.select.split(",") if s]
        if not selected:
            raise CliValidationError("--select needs at least one instance id")
        known = {inst.id for inst in bundle.instances}
        bad = [s for s in selected if s not in known]
        if bad:
            raise CliValidationError(
                f"unknown instance ids: {', '.join(bad)} (valid: {', '.join(sorted(known))})"
            )
    dump = Path(args.dump) if args.dump else None
    result = pipeline.erase(bundle, selected, config, dump_dir=dump)
    write_rgb(args.out, result.final_image)
    for stage, ms in result.timings.items():
        print(f"timing {stage} {ms:.1f}ms", file=sys.stderr)
    print(args.out)
    return 0


def _cmd_evaluate(args) -> int:
    from .metrics import IncoherenceParams, evaluate

    methods = _load_json(args.methods, "methods")
    if not isinstance(methods, list) or not all(isinstance(m, dict) and "label" in m for m in methods):
        raise CliValidationError("methods file must be a JSON list of {label, ...} objects")
    params = IncoherenceParams()
    if args.params:
        try:
            params = IncoherenceParams(**_load_json(args.params, "params"))
        except (TypeError, ValueError) as e:
            raise CliValidationError(f"bad incoherence params: {e}") from e
    adapter = None
    if args.lpips_adapter:
        try:
            adapter = AdapterConfig.from_dict(_load_json(args.lpips_adapter, "LPIPS adapter"))
        except AdapterError as e:
            raise CliValidationError(str(e)) from e
    if not Path(args.dataset).is_dir():
        raise CliValidationError(f"dataset directory not found: {args.dataset}")
    report = evaluate(
        args.dataset,
        methods,
        params=params,
        adapter=adapter,
        report_dir=args.report,
        psnr_region=args.psnr_region,
    )
    for label, stats in report.means.items():
        inc = stats["incoherence"]
        snr = stats["psnr"]
        print(
            f"{label}: incoherence {inc if inc is not None else '-'} "
            f"psnr {snr if snr is not None else '-'} "
            f"n={stats['count']} failures={stats['failures']}"
        )
    print(str(Path(args.report) / "report.csv"))
    return 0


def _cmd_rectify(args) -> int:
    from .geometry import compute_rectification, unknown_mask, warp_image
    from .scene import load_scene

    bundle = load_scene(args.scene)
    plane = bundle.plane_by_id(args.plane)
    frame = compute_rectification(plane, bundle.intrinsics, args.target_long_side)
    dims = (frame.rect_width, frame.rect_height)
    rect, valid = warp_image(bundle.image, frame.h_orig_to_rect, dims)
    out = Path(args.out)
    write_rgb(out, rect)
    write_mask(out.with_name(out.stem + "_validity.png"), valid)
    unknown = unknown_mask(frame, bundle.intrinsics)
    write_mask(out.with_name(out.stem + "_unknown.png"), unknown)
    sidecar = {
        "plane_id": frame.plane_id,
        "h_orig_to_rect": [[float(v) for v in row] for row in frame.h_orig_to_rect.m],
        "rect_width": frame.rect_width,
        "rect_height": frame.rect_height,
        "pixels_per_meter": frame.pixels_per_meter,
        "virtual_focal": frame.virtual_focal,
    }
    with open(out.with_name(out.stem + "_frame.json"), "w") as f:
        json.dump(sidecar, f, indent=2)
    print(str(out))
    return 0


def _cmd_metrics(args) -> int:
    from .metrics import incoherence, psnr

    gt = read_rgb(args.gt)
    pred = read_rgb(args.pred)
    mask = read_mask(args.mask)
    if gt.shape != pred.shape:
        raise CliValidationError(f"gt dims {gt.shape} != pred dims {pred.shape}")
    if mask.shape != gt.shape[:2]:
        raise CliValidationError(f"mask dims {mask.shape} != image dims {gt.shape[:2]}")
    if not mask.any():
        raise CliValidationError("mask is empty")
    inc = incoherence(gt, pred, mask)
    snr = psnr(gt, pred, mask if args.psnr_region == "mask" else None)
    print(f"incoherence {inc}")
    print(f"psnr {snr}")
    return 0


def _cmd_serve(args) -> int:
    from .scene import load_scene
    from .service import serve

    bundle = load_scene(args.scene)
    config = _pipeline_config(args.config)
    port = args.port
    fe_port = os.environ.get("FE_PORT")
    if fe_port:
        try:
            port = int(fe_port)
        except ValueError:
            raise CliValidationError(f"FE_PORT must be an integer, got {fe_port!r}")
    static_dir = args.frontend if args.frontend else None
    if static_dir is not None and not Path(static_dir).is_dir():
        raise CliValidationError(f"frontend directory not found: {static_dir}")
    print(f"serving scene {args.scene} on {args.host}:{port}", file=sys.stderr)
    serve(bundle, port, config, static_dir=static_dir, host=args.host)
    return 0


def _cmd_inpaint(args) -> int:
    from .backends import InpaintRequest, inpaint, make_backend

    image = read_rgb(args.image)
    mask = read_mask(args.mask)
    if mask.shape != image.shape[:2]:
        raise CliValidationError(f"mask dims {mask.shape} != image dims {image.shape[:2]}")
    backend_cfg = {"kind": "patchmatch"}
    if args.backend:
        backend_cfg = _load_json(args.backend, "backend config")
    try:
        request = InpaintRequest(image, mask)
    except ValueError as e:
        raise CliValidationError(str(e)) from e
    result = inpaint(request, make_backend(backend_cfg))
    write_rgb(args.out, result)
    print(args.out)
    return 0


def _cmd_demo(args) -> int:
    from .synthetic import write_demo_scene

    if args.width < 32 or args.height < 32:
        raise CliValidationError("demo dims must be at least 32x32")
    out = write_demo_scene(args.out, args.width, args.height)
    print(str(out))
    return 0


_COMMANDS = {
    "erase": _cmd_erase,
    "evaluate": _cmd_evaluate,
    "rectify": _cmd_rectify,
    "metrics": _cmd_metrics,
    "serve": _cmd_serve,
    "inpaint": _cmd_inpaint,
    "demo": _cmd_demo,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (CliValidationError, SceneError) as e:
        print(f"planefill: error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"planefill: error: {e}", file=sys.stderr)
        return 1
    except (PipelineError, BackendError, AdapterError, GeometryError) as e:
        print(f"planefill: failure: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"planefill: error: {e}", file=sys.stderr)
        return 1
    except PlanefillError as e:
        print(f"planefill: failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
