"""HTTP service for interactive object removal: scene inspection plus erase ops.

One scene per service instance. Every displayed image is recomputed from the
original bundle and the current erased set (never incrementally), with results
cached by erased-set key; an undo stack of erased-set snapshots gives exact
rollback. Mutations on the session are serialized: a second mutation arriving
while one computes gets 409.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from pydantic import BaseModel as _BaseModel

from .errors import PipelineError
from .imgio import encode_png
from .pipeline import PipelineConfig, erase
from .scene import SceneBundle

OUTLINE_TOLERANCE_PX = 1.5


def mask_outline(mask: np.ndarray, tolerance: float = OUTLINE_TOLERANCE_PX) -> list[list[int]]:
    """Trace the mask boundary as a simplified polygon ([x, y] vertex list).

    Simplification backs off toward the raw contour until the filled polygon
    reproduces the mask with IoU >= 0.95 (reachable for connected masks).
    """
    import cv2

    mask_u8 = mask.astype(np.uint8)
    contours, _ = cv2.findContours(mask_u8, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE)
    if not contours:
        return []
    largest = max(contours, key=cv2.contourArea)
    for eps in (tolerance, 0.5, 0.0):
        approx = cv2.approxPolyDP(largest, eps, True) if eps > 0 else largest
        poly = [[int(p[0][0]), int(p[0][1])] for p in approx]
        if len(poly) >= 3 and polygon_mask_iou(poly, mask) >= 0.95:
            return poly
    return [[int(p[0][0]), int(p[0][1])] for p in largest]


def polygon_mask_iou(polygon: list[list[int]], mask: np.ndarray) -> float:
    from PIL import Image, ImageDraw

    h, w = mask.shape
    img = Image.new("1", (w, h), 0)
    ImageDraw.Draw(img).polygon([tuple(p) for p in polygon], fill=1, outline=1)
    filled = np.asarray(img, dtype=bool)
    inter = (filled & mask).sum()
    union = (filled | mask).sum()
    return float(inter) / float(union) if union else 0.0


def _bbox(mask: np.ndarray) -> list[int]:
    ys, xs = np.nonzero(mask)
    return [int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1)]


# module level so FastAPI can resolve the (postponed) endpoint annotations
class IdsBody(_BaseModel):
    ids: list[str]


@dataclass
class SessionState:
    session_id: str
    bundle: SceneBundle
    config: PipelineConfig
    erased: list[str] = field(default_factory=list)
    history: list[tuple[str, ...]] = field(default_factory=lambda: [()])
    result_cache: dict = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def cache_key(self, erased: list[str]) -> tuple[str, ...]:
        return tuple(sorted(erased))

    def compute(self, erased: list[str]) -> tuple[bytes, dict, bool]:
        """PNG + timings for an erased set, from cache when available."""
        key = self.cache_key(erased)
        if key in self.result_cache:
            png, timings = self.result_cache[key]
            return png, timings, True
        if not key:
            png = encode_png(self.bundle.image)
            timings = {k: 0.0 for k in ("rectify", "backend", "unrectify", "composite", "final_pass")}
        else:
            result = erase(self.bundle, list(key), self.config)
            png = encode_png(result.final_image)
            timings = result.timings
        self.result_cache[key] = (png, timings)
        return png, timings, False


def create_app(bundle: SceneBundle, config: PipelineConfig | None = None, static_dir: str | Path | None = None):
    from fastapi import FastAPI, Request
    from fastapi.exceptions import RequestValidationError
    from fastapi.responses import JSONResponse, Response

    state = SessionState(
        session_id=uuid.uuid4().hex,
        bundle=bundle,
        config=config or PipelineConfig(),
    )
    app = FastAPI(title="planefill")
    app.state.session = state

    # the UI treats any malformed payload as a client bug; flatten FastAPI's
    # default 422 into 400
    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": "malformed request body"})

    def _check_ids(ids: list[str]) -> JSONResponse | None:
        valid = state.bundle.instance_ids
        unknown = [i for i in ids if i not in valid]
        if unknown:
            return JSONResponse(
                status_code=404,
                content={"detail": f"unknown instance id(s) {unknown}; valid ids: {sorted(valid)}"},
            )
        return None

    def _mutate(new_erased: list[str]) -> Response:
        if not state.lock.acquire(blocking=False):
            return JSONResponse(status_code=409, content={"detail": "a computation is already running"})
        try:
            png, timings, cached = state.compute(new_erased)
            state.erased = list(dict.fromkeys(new_erased))
            snapshot = tuple(state.erased)
            # no-op mutations (erasing an already-erased id) should not stack
            # duplicate undo snapshots
            if state.history[-1] != snapshot:
                state.history.append(snapshot)
            return JSONResponse(
                {
                    "image_url": f"/api/image/current?v={hash(tuple(sorted(state.erased))) & 0xFFFFFFFF:08x}",
                    "timings": timings,
                    "cached": cached,
                    "erased": state.erased,
                }
            )
        except PipelineError as e:
            return JSONResponse(status_code=500, content={"detail": str(e)})
        finally:
            state.lock.release()

    @app.get("/api/scene")
    def get_scene():
        instances = [
            {
                "id": inst.id,
                "label": inst.label,
                "bbox": _bbox(inst.mask),
                "outline": mask_outline(inst.mask),
            }
            for inst in state.bundle.instances
        ]
        planes = [{"id": p.id, "kind": p.kind.value} for p in state.bundle.planes]
        return {
            "instances": instances,
            "planes": planes,
            "image_url": "/api/image/original",
            "width": state.bundle.intrinsics.width,
            "height": state.bundle.intrinsics.height,
            "erased": state.erased,
        }

    @app.get("/api/image/original")
    def get_original():
        return Response(content=encode_png(state.bundle.image), media_type="image/png")

    @app.get("/api/image/current")
    def get_current():
        png, _, _ = state.compute(state.erased)
        return Response(content=png, media_type="image/png")

    @app.post("/api/erase")
    def post_erase(body: IdsBody):
        err = _check_ids(body.ids)
        if err is not None:
            return err
        new_erased = state.erased + [i for i in body.ids if i not in state.erased]
        return _mutate(new_erased)

    @app.post("/api/restore")
    def post_restore(body: IdsBody):
        err = _check_ids(body.ids)
        if err is not None:
            return err
        new_erased = [i for i in state.erased if i not in set(body.ids)]
        return _mutate(new_erased)

    @app.post("/api/undo")
    def post_undo():
        if len(state.history) < 2:
            return JSONResponse(status_code=400, content={"detail": "nothing to undo"})
        if not state.lock.acquire(blocking=False):
            return JSONResponse(status_code=409, content={"detail": "a computation is already running"})
        try:
            state.history.pop()
            previous = list(state.history[-1])
            png, timings, cached = state.compute(previous)
            state.erased = previous
            return JSONResponse(
                {
                    "image_url": f"/api/image/current?v={hash(tuple(sorted(previous))) & 0xFFFFFFFF:08x}",
                    "timings": timings,
                    "cached": cached,
                    "erased": state.erased,
                }
            )
        finally:
            state.lock.release()

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="frontend")
    return app


def serve(bundle: SceneBundle, port: int, config: PipelineConfig | None = None, static_dir=None, host: str = "127.0.0.1") -> None:
    import uvicorn

    app = create_app(bundle, config, static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
