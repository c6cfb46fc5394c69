"""Building 9-channel stacked inputs from images.

Channel layout: 0-2 prompt original, 3-5 prompt replica, 6-8 target.
When no prompt pair applies (gallery images, zero-shot queries) the
target is duplicated into all three slots ("pseudo-prompt").
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image


class ShapeError(ValueError):
    pass


def load_rgb(path: str | os.PathLike, side: int) -> np.ndarray:
    """Load an image, resize to side x side, return float32 (3, H, W) in [0, 1]."""
    with Image.open(path) as im:
        im = im.convert("RGB").resize((side, side), Image.BILINEAR)
        arr = np.asarray(im, dtype=np.float32) / 255.0
    return np.transpose(arr, (2, 0, 1))


def _check(img: np.ndarray, name: str, side: int | None) -> None:
    if img.ndim != 3 or img.shape[0] != 3:
        raise ShapeError(f"{name} must be (3, H, W), got {img.shape}")
    if side is not None and img.shape[1:] != (side, side):
        raise ShapeError(f"{name} must be (3, {side}, {side}), got {img.shape}")


def stack(prompt_original: np.ndarray, prompt_replica: np.ndarray,
          target: np.ndarray) -> np.ndarray:
    """Concatenate the three (3, H, W) images into a (9, H, W) input."""
    side = target.shape[-1] if target.ndim == 3 else None
    _check(target, "target", None)
    _check(prompt_original, "prompt_original", target.shape[1])
    _check(prompt_replica, "prompt_replica", target.shape[1])
    if target.shape[1] != target.shape[2]:
        raise ShapeError(f"target must be square, got {target.shape}")
    return np.concatenate([prompt_original, prompt_replica, target], axis=0)


def pseudo(target: np.ndarray) -> np.ndarray:
    """Stack a target with two copies of itself (no prompt available)."""
    return stack(target, target, target)
