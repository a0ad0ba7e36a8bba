"""Plane-aware object removal for indoor scenes.

The pipeline rectifies each room plane to a fronto-parallel view, fills the
removal mask there with a pluggable inpainting backend (reference backend:
multiscale PatchMatch), warps the fills back, and composites them with
feathered seams. Includes removal-quality metrics, a batch CLI, and an HTTP
service for interactive click-to-erase use.
"""

from .adapters import AdapterConfig
from .backends import (
    DiffusionBackend,
    ExternalBackend,
    InpaintRequest,
    PatchMatchBackend,
    diffusion_fill,
    external_inpaint,
    histogram_match,
    inpaint,
    make_backend,
)
from .errors import (
    AdapterError,
    BackendError,
    GeometryError,
    PipelineError,
    PlanefillError,
    SceneError,
)
from .geometry import (
    Homography,
    RectifiedFrame,
    assign_masked_pixels,
    compute_rectification,
    rectifying_rotation,
    unknown_mask,
    warp_image,
    warp_mask,
)
from .metrics import (
    EvalRecord,
    EvalReport,
    IncoherenceParams,
    edge_map,
    evaluate,
    incoherence,
    incoherence_from_edge_maps,
    lpips_external,
    psnr,
    synthesize_test_masks,
)
from .patchmatch import NNField, PatchMatchParams, nnf_search, patchmatch_inpaint
from .pipeline import (
    ALL,
    PipelineConfig,
    PipelineResult,
    PlaneInpaintResult,
    build_inpaint_mask,
    composite,
    erase,
    erase_mask,
    inpaint_plane,
)
from .scene import (
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

__version__ = "0.1.0"

__all__ = [
    "ALL",
    "AdapterConfig",
    "AdapterError",
    "BackendError",
    "CameraIntrinsics",
    "DiffusionBackend",
    "EvalRecord",
    "EvalReport",
    "ExternalBackend",
    "GeometryError",
    "Homography",
    "IncoherenceParams",
    "InpaintRequest",
    "InstanceMask",
    "NNField",
    "PatchMatchBackend",
    "PatchMatchParams",
    "PipelineConfig",
    "PipelineError",
    "PipelineResult",
    "Plane",
    "PlaneInpaintResult",
    "PlaneKind",
    "PlanefillError",
    "SceneBundle",
    "SceneError",
    "assign_masked_pixels",
    "build_inpaint_mask",
    "canonicalize_plane",
    "composite",
    "compute_rectification",
    "diffusion_fill",
    "edge_map",
    "erase",
    "erase_mask",
    "evaluate",
    "external_inpaint",
    "histogram_match",
    "incoherence",
    "incoherence_from_edge_maps",
    "inpaint",
    "inpaint_plane",
    "load_scene",
    "lpips_external",
    "make_backend",
    "nnf_search",
    "patchmatch_inpaint",
    "plane_ray_depths",
    "psnr",
    "rectifying_rotation",
    "save_scene",
    "synthesize_test_masks",
    "unknown_mask",
    "validate_scene",
    "warp_image",
    "warp_mask",
]
