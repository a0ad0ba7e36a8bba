"""Exception types shared across the package."""


class PlanefillError(Exception):
    """Base class for all package errors."""


class SceneError(PlanefillError):
    """Scene bundle is malformed (missing file, bad field, invariant violation)."""


class GeometryError(PlanefillError):
    """Degenerate geometry: zero-norm normal, plane through camera, horizon crossing."""


class BackendError(PlanefillError):
    """An inpainting backend failed. Carries the backend name for diagnostics."""

    def __init__(self, backend: str, message: str):
        super().__init__(f"backend '{backend}': {message}")
        self.backend = backend


class AdapterError(PlanefillError):
    """External adapter (command or HTTP) failed or returned garbage."""


class PipelineError(PlanefillError):
    """A pipeline stage failed. Message is annotated with stage and plane id."""
