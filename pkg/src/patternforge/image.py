"""RGB image representation and I/O.

Images are numpy uint8 arrays of shape (H, W, 3), row-major. PNG is the
required lossless interchange format; JPEG files are accepted on decode.
"""

from __future__ import annotations

import io
import os

import numpy as np
from PIL import Image as PILImage

BT601 = np.array([0.299, 0.587, 0.114], dtype=np.float64)


class ImageError(ValueError):
    """Raised for malformed image data or degenerate outputs."""


def validate_image(img: np.ndarray) -> np.ndarray:
    if not isinstance(img, np.ndarray):
        raise ImageError("image must be a numpy array")
    if img.ndim != 3 or img.shape[2] != 3:
        raise ImageError(f"image must have shape (H, W, 3), got {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ImageError(f"image dimensions must be >= 1, got {img.shape[:2]}")
    if img.dtype != np.uint8:
        raise ImageError(f"image dtype must be uint8, got {img.dtype}")
    return img


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Decode a PNG or JPEG file to an (H, W, 3) uint8 array."""
    with PILImage.open(path) as im:
        if im.format not in ("PNG", "JPEG"):
            raise ImageError(f"unsupported image format {im.format!r} for {path}")
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_png(img: np.ndarray, path: str | os.PathLike) -> None:
    validate_image(img)
    PILImage.fromarray(img, mode="RGB").save(path, format="PNG")


def encode_jpeg_roundtrip(img: np.ndarray, quality: int) -> np.ndarray:
    """Encode to JPEG at the given quality and decode back (in memory)."""
    buf = io.BytesIO()
    PILImage.fromarray(img, mode="RGB").save(buf, format="JPEG", quality=int(quality))
    buf.seek(0)
    with PILImage.open(buf) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def luma601(img: np.ndarray) -> np.ndarray:
    """BT.601 luma as float64, shape (H, W)."""
    return img.astype(np.float64) @ BT601


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round half away from zero (numpy's default rounds half to even)."""
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def to_uint8(x: np.ndarray) -> np.ndarray:
    return np.clip(round_half_away(np.asarray(x, dtype=np.float64)), 0, 255).astype(np.uint8)


def bilinear_sample(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample an image at fractional coordinates with bilinear interpolation.

    Coordinates outside the image are clamped to the edge. `ys`/`xs` are
    float arrays of identical shape; returns float64 samples of shape
    ys.shape + (3,).
    """
    h, w = img.shape[:2]
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[..., None]
    fx = (xs - x0)[..., None]
    f = img.astype(np.float64)
    top = f[y0, x0] * (1 - fx) + f[y0, x1] * fx
    bot = f[y1, x0] * (1 - fx) + f[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize with edge-clamped bilinear sampling (pixel-center aligned)."""
    if out_h < 1 or out_w < 1:
        raise ImageError("resize target must be at least 1x1")
    h, w = img.shape[:2]
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return to_uint8(bilinear_sample(img, yy, xx))
