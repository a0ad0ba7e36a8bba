"""PNG I/O helpers. Masks are 8-bit grayscale, threshold >= 128 means set."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image

MASK_THRESHOLD = 128


def read_rgb(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def read_mask(path: str | Path) -> np.ndarray:
    """Load an 8-bit grayscale mask as a bool array."""
    with Image.open(path) as im:
        gray = np.asarray(im.convert("L"), dtype=np.uint8)
    return gray >= MASK_THRESHOLD


def read_gray01(path: str | Path) -> np.ndarray:
    """Load an 8-bit grayscale image scaled to [0, 1] (external edge maps)."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float64) / 255.0


def write_rgb(path: str | Path, image: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8), mode="RGB").save(path)


def write_mask(path: str | Path, mask: np.ndarray) -> None:
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(path)


def encode_png(image: np.ndarray) -> bytes:
    """Encode an RGB uint8 array to PNG bytes (HTTP responses)."""
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png_rgb(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)
