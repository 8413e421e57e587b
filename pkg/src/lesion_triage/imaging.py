"""Small raster I/O helpers shared by the training and service code paths.

Images are numpy uint8 arrays, shape (H, W, 3) for RGB and (H, W) bool for
binary masks. Masks persist as 1-bit PNG.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import UndecodableImageError


def load_rgb(path: str | Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except (UnidentifiedImageError, OSError) as exc:
        raise UndecodableImageError(f"{path}: {exc}") from exc


def decode_rgb(data: bytes) -> np.ndarray:
    if not data:
        raise UndecodableImageError("empty image payload")
    try:
        with Image.open(io.BytesIO(data)) as im:
            return np.asarray(im.convert("RGB"))
    except (UnidentifiedImageError, OSError) as exc:
        raise UndecodableImageError(str(exc)) from exc


def save_png(image: np.ndarray, path: str | Path) -> None:
    Image.fromarray(image).save(path, format="PNG")


def png_bytes(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(image).save(buf, format="PNG")
    return buf.getvalue()


def resize_rgb(image: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Bilinear resize to (width, height); no-op when already that size."""
    h, w = image.shape[:2]
    if (w, h) == size:
        return image
    return np.asarray(Image.fromarray(image).resize(size, Image.BILINEAR))


def resize_mask(mask: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    h, w = mask.shape
    if (w, h) == size:
        return mask
    im = Image.fromarray(mask.astype(np.uint8) * 255).resize(size, Image.NEAREST)
    return np.asarray(im) > 127


def save_mask_png(mask: np.ndarray, path: str | Path) -> None:
    Image.fromarray(mask.astype(bool)).convert("1").save(path, format="PNG")


def load_mask_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("1"), dtype=bool)
