"""Catalog of tamper patterns as deterministic, seed-parameterized transforms.

Every pattern is a pure function of (image, instance, optional partner).
Parameter values are sampled from each pattern's declared schema using a
Philox generator keyed only by the instance seed, so the same (pattern_id,
seed) always yields the same parameters and the same output bytes.

Patterns that composite a second image (Blend, StackImage) accept an
explicit partner; without one they synthesize a seeded procedural partner
so the engine stays self-contained.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .image import (
    bilinear_sample,
    encode_jpeg_roundtrip,
    luma601,
    resize_bilinear,
    round_half_away,
    to_uint8,
    validate_image,
)
from .rng import derive_seed, make_rng


class CatalogError(KeyError):
    """Unknown pattern id."""


class ParamError(ValueError):
    """Parameter values violate the pattern's schema."""


class PatternError(ValueError):
    """A pattern produced (or would produce) a degenerate output."""


@dataclass(frozen=True)
class PatternDescriptor:
    id: str
    category: str  # geometric | photometric | overlay | composite
    split: str  # base | novel
    param_schema: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PatternInstance:
    pattern_id: str
    params: dict
    seed: int


@dataclass(frozen=True)
class PatternCombo:
    instances: tuple

    def __post_init__(self):
        if len(self.instances) < 1:
            raise ParamError("a combo needs at least one instance")

    @property
    def pattern_ids(self) -> list[str]:
        return [inst.pattern_id for inst in self.instances]


def _f(low, high):
    return {"kind": "float", "low": float(low), "high": float(high)}


def _i(low, high):
    return {"kind": "int", "low": int(low), "high": int(high)}


def _c(*options):
    return {"kind": "choice", "options": list(options)}


# ---------------------------------------------------------------------------
# transform helpers


def _procedural_partner(shape, rng):
    """Seeded stand-in partner image: smooth color gradient plus noise."""
    h, w = shape[:2]
    c0 = rng.integers(0, 256, size=3).astype(np.float64)
    c1 = rng.integers(0, 256, size=3).astype(np.float64)
    t = (np.linspace(0, 1, h)[:, None] + np.linspace(0, 1, w)[None, :]) / 2.0
    grad = c0[None, None, :] * (1 - t[..., None]) + c1[None, None, :] * t[..., None]
    noise = rng.normal(0.0, 12.0, size=(h, w, 3))
    return to_uint8(grad + noise)


def _partner_for(img, partner, seed, pattern_id):
    if partner is not None:
        validate_image(partner)
        if partner.shape != img.shape:
            partner = resize_bilinear(partner, img.shape[0], img.shape[1])
        return partner
    rng = make_rng(derive_seed(seed, pattern_id + ":partner", 0))
    return _procedural_partner(img.shape, rng)


def _gaussian_blur(img, sigma):
    f = img.astype(np.float64)
    out = ndimage.gaussian_filter(f, sigma=(sigma, sigma, 0), mode="nearest")
    return to_uint8(out)


def _pixelate(img, block, oy=0, ox=0):
    h, w = img.shape[:2]
    block = max(1, int(block))
    ys = np.arange(h)
    xs = np.arange(w)
    by = (ys + oy) // block
    bx = (xs + ox) // block
    f = img.astype(np.float64)
    out = np.empty_like(f)
    # mean per (by, bx) cell via bincount on the flattened cell index
    ncols = bx.max() + 1
    cell = (by[:, None] * ncols + bx[None, :]).ravel()
    counts = np.bincount(cell)
    for c in range(3):
        sums = np.bincount(cell, weights=f[:, :, c].ravel())
        out[:, :, c] = (sums / counts)[cell].reshape(h, w)
    return to_uint8(out)


def _warp(img, ys, xs):
    return to_uint8(bilinear_sample(img, ys, xs))


def _out_grid(h, w):
    return np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")


def _homography(src_pts, dst_pts):
    """3x3 matrix H with H @ dst ~ src (both lists of four (x, y) points)."""
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((sx, sy), (dx, dy)) in enumerate(zip(src_pts, dst_pts)):
        a[2 * i] = [dx, dy, 1, 0, 0, 0, -dx * sx, -dy * sx]
        b[2 * i] = sx
        a[2 * i + 1] = [0, 0, 0, dx, dy, 1, -dx * sy, -dy * sy]
        b[2 * i + 1] = sy
    coeffs = np.linalg.solve(a, b)
    return np.append(coeffs, 1.0).reshape(3, 3)


def _blend_over(img, overlay_mask, color, alpha):
    f = img.astype(np.float64)
    col = np.asarray(color, dtype=np.float64)
    m = overlay_mask[..., None] * alpha
    return to_uint8(f * (1 - m) + col[None, None, :] * m)


# ---------------------------------------------------------------------------
# pattern implementations (img: uint8 HxWx3, params: dict, rng: Generator)


def _p_resizecrop(img, p, rng, partner):
    # fractional (subpixel) crop window resized back to the input size;
    # frac=1 reduces to the identity
    h, w = img.shape[:2]
    ch, cw = p["frac"] * h, p["frac"] * w
    y0 = p["cy"] * (h - ch)
    x0 = p["cx"] * (w - cw)
    ys = y0 + (np.arange(h) + 0.5) * ch / h - 0.5
    xs = x0 + (np.arange(w) + 0.5) * cw / w - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return _warp(img, yy, xx)


def _p_blend(img, p, rng, partner):
    a = p["alpha"]
    return to_uint8(img.astype(np.float64) * a + partner.astype(np.float64) * (1 - a))


def _p_grayscale(img, p, rng, partner):
    y = np.clip(round_half_away(luma601(img)), 0, 255).astype(np.uint8)
    return np.repeat(y[:, :, None], 3, axis=2)


def _p_colorjitter(img, p, rng, partner):
    f = img.astype(np.float64)
    f = f * p["brightness"]
    mean = f.mean()
    f = (f - mean) * p["contrast"] + mean
    gray = (f @ np.array([0.299, 0.587, 0.114]))[..., None]
    f = gray + (f - gray) * p["saturation"]
    # hue rotation about the gray axis
    theta = p["hue"] * 2 * np.pi
    cos_a, sin_a = np.cos(theta), np.sin(theta)
    one_third = 1.0 / 3.0
    sqrt_third = np.sqrt(one_third)
    m = np.full((3, 3), one_third * (1.0 - cos_a))
    m += np.eye(3) * cos_a
    off = sqrt_third * sin_a
    m += np.array([[0, -off, off], [off, 0, -off], [-off, off, 0]])
    f = f @ m.T
    return to_uint8(f)


def _p_blur(img, p, rng, partner):
    return _gaussian_blur(img, p["sigma"])


def _p_pixelate(img, p, rng, partner):
    b = p["block"]
    return _pixelate(img, b, oy=int(p["oy_frac"] * b), ox=int(p["ox_frac"] * b))


def _p_rotate(img, p, rng, partner):
    h, w = img.shape[:2]
    theta = np.deg2rad(p["angle"])
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = _out_grid(h, w)
    dy, dx = yy - cy, xx - cx
    src_y = cy + dy * np.cos(theta) - dx * np.sin(theta)
    src_x = cx + dy * np.sin(theta) + dx * np.cos(theta)
    return _warp(img, src_y, src_x)


def _p_padding(img, p, rng, partner):
    h, w = img.shape[:2]
    t = int(round(p["top"] * h))
    b = int(round(p["bottom"] * h))
    l = int(round(p["left"] * w))
    r = int(round(p["right"] * w))
    color = np.array([p["r"], p["g"], p["b"]], dtype=np.uint8)
    out = np.empty((h + t + b, w + l + r, 3), dtype=np.uint8)
    out[:] = color
    out[t : t + h, l : l + w] = img
    return out


def _p_addnoise(img, p, rng, partner):
    noise = rng.normal(0.0, p["sigma"], size=img.shape)
    return to_uint8(img.astype(np.float64) + noise)


def _p_vertflip(img, p, rng, partner):
    return img[::-1].copy()


def _p_horiflip(img, p, rng, partner):
    return img[:, ::-1].copy()


def _p_perspchange(img, p, rng, partner):
    h, w = img.shape[:2]
    if h < 2 or w < 2:
        return img.copy()  # corners degenerate, homography undefined
    # pull each source corner inward by its jitter fractions
    src = [
        (p["j0x"] * w, p["j0y"] * h),
        (w - 1 - p["j1x"] * w, p["j1y"] * h),
        (w - 1 - p["j2x"] * w, h - 1 - p["j2y"] * h),
        (p["j3x"] * w, h - 1 - p["j3y"] * h),
    ]
    dst = [(0, 0), (w - 1, 0), (w - 1, h - 1), (0, h - 1)]
    hmat = _homography(src, dst)
    yy, xx = _out_grid(h, w)
    denom = hmat[2, 0] * xx + hmat[2, 1] * yy + hmat[2, 2]
    src_x = (hmat[0, 0] * xx + hmat[0, 1] * yy + hmat[0, 2]) / denom
    src_y = (hmat[1, 0] * xx + hmat[1, 1] * yy + hmat[1, 2]) / denom
    return _warp(img, src_y, src_x)


def _p_stackimage(img, p, rng, partner):
    axis = 0 if p["axis"] == "h" else 1
    pair = (img, partner) if p["order"] == "first" else (partner, img)
    return np.concatenate(pair, axis=axis)


def _p_changechan(img, p, rng, partner):
    op = p["op"]
    if op.startswith("swap_"):
        order = {"swap_rg": [1, 0, 2], "swap_gb": [0, 2, 1], "swap_rb": [2, 1, 0]}[op]
        return img[:, :, order].copy()
    if op == "roll1":
        return img[:, :, [2, 0, 1]].copy()
    if op == "roll2":
        return img[:, :, [1, 2, 0]].copy()
    ch = {"invert_r": 0, "invert_g": 1, "invert_b": 2}[op]
    out = img.copy()
    out[:, :, ch] = 255 - out[:, :, ch]
    return out


def _p_encquality(img, p, rng, partner):
    return encode_jpeg_roundtrip(img, p["quality"])


def _p_addstripes(img, p, rng, partner):
    h, w = img.shape[:2]
    spacing, width = p["spacing"], p["width"]
    idx = np.arange(h) if p["orientation"] == "horizontal" else np.arange(w)
    phase = int(p["phase_frac"] * spacing)
    line = ((idx + phase) % spacing) < width
    mask = np.broadcast_to(line[:, None] if p["orientation"] == "horizontal" else line[None, :], (h, w))
    return _blend_over(img, mask.astype(np.float64), (p["r"], p["g"], p["b"]), p["alpha"])


def _p_sharpen(img, p, rng, partner):
    f = img.astype(np.float64)
    blur = ndimage.gaussian_filter(f, sigma=(1.0, 1.0, 0), mode="nearest")
    return to_uint8(f + p["amount"] * (f - blur))


def _p_skew(img, p, rng, partner):
    h, w = img.shape[:2]
    shear = np.tan(np.deg2rad(p["angle"]))
    yy, xx = _out_grid(h, w)
    if p["axis"] == "h":
        src_y, src_x = yy, xx + shear * (yy - (h - 1) / 2.0)
    else:
        src_y, src_x = yy + shear * (xx - (w - 1) / 2.0), xx
    return _warp(img, src_y, src_x)


def _p_shufpixels(img, p, rng, partner):
    h, w = img.shape[:2]
    n = max(2, int(round(p["frac"] * h * w)))
    n = min(n, h * w)
    flat = img.reshape(-1, 3).copy()
    idx = rng.choice(h * w, size=n, replace=False)
    perm = rng.permutation(n)
    flat[idx] = flat[idx[perm]]
    return flat.reshape(h, w, 3)


def _p_addshapes(img, p, rng, partner):
    h, w = img.shape[:2]
    out = img
    yy, xx = _out_grid(h, w)
    for _ in range(p["count"]):
        kind = ["rect", "ellipse", "triangle"][rng.integers(3)]
        color = rng.integers(0, 256, size=3)
        alpha = rng.uniform(0.4, 1.0)
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        sy, sx = rng.uniform(0.1, 0.35) * h, rng.uniform(0.1, 0.35) * w
        if kind == "rect":
            mask = (np.abs(yy - cy) <= sy) & (np.abs(xx - cx) <= sx)
        elif kind == "ellipse":
            mask = ((yy - cy) / max(sy, 1e-9)) ** 2 + ((xx - cx) / max(sx, 1e-9)) ** 2 <= 1.0
        else:
            pts = np.stack([rng.uniform(0, h, 3), rng.uniform(0, w, 3)], axis=1)
            mask = np.ones((h, w), dtype=bool)
            for i in range(3):
                (ay, ax), (by, bx) = pts[i], pts[(i + 1) % 3]
                (ocy, ocx) = pts[(i + 2) % 3]
                cross = (bx - ax) * (yy - ay) - (by - ay) * (xx - ax)
                ref = (bx - ax) * (ocy - ay) - (by - ay) * (ocx - ax)
                mask &= cross * ref >= 0
        out = _blend_over(out, mask.astype(np.float64), color, alpha)
    return out


def _p_repeat(img, p, rng, partner):
    reps = p["reps"]
    h, w = img.shape[:2]
    cell = resize_bilinear(img, max(1, h // reps), max(1, w // reps))
    return np.tile(cell, (reps, reps, 1))


def _p_cutassemble(img, p, rng, partner):
    h, w = img.shape[:2]
    g = min(p["grid"], h, w)
    ch, cw = h // g, w // g
    cells = [img[r * ch : (r + 1) * ch, c * cw : (c + 1) * cw] for r in range(g) for c in range(g)]
    perm = rng.permutation(g * g)
    rows = [np.concatenate([cells[perm[r * g + c]] for c in range(g)], axis=1) for r in range(g)]
    return np.concatenate(rows, axis=0)


def _p_cutpaste(img, p, rng, partner):
    h, w = img.shape[:2]
    rh = max(1, int(round(p["hfrac"] * h)))
    rw = max(1, int(round(p["wfrac"] * w)))
    rh, rw = min(rh, h), min(rw, w)
    y1, x1 = rng.integers(0, h - rh + 1), rng.integers(0, w - rw + 1)
    y2, x2 = rng.integers(0, h - rh + 1), rng.integers(0, w - rw + 1)
    out = img.copy()
    a = out[y1 : y1 + rh, x1 : x1 + rw].copy()
    b = out[y2 : y2 + rh, x2 : x2 + rw].copy()
    out[y1 : y1 + rh, x1 : x1 + rw] = b
    out[y2 : y2 + rh, x2 : x2 + rw] = a
    return out


def _p_solarize(img, p, rng, partner):
    out = img.copy()
    inv = out >= p["threshold"]
    out[inv] = 255 - out[inv]
    return out


def _p_posterize(img, p, rng, partner):
    shift = 8 - p["bits"]
    return ((img >> shift) << shift).astype(np.uint8)


def _p_gamma(img, p, rng, partner):
    f = img.astype(np.float64) / 255.0
    return to_uint8(255.0 * np.power(f, p["gamma"]))


def _p_erasing(img, p, rng, partner):
    h, w = img.shape[:2]
    area = p["area"] * h * w
    aspect = p["aspect"]
    rh = max(1, min(h, int(round(np.sqrt(area * aspect)))))
    rw = max(1, min(w, int(round(np.sqrt(area / aspect)))))
    y0, x0 = rng.integers(0, h - rh + 1), rng.integers(0, w - rw + 1)
    out = img.copy()
    if p["fill"] == "color":
        out[y0 : y0 + rh, x0 : x0 + rw] = np.array([p["r"], p["g"], p["b"]], dtype=np.uint8)
    else:
        out[y0 : y0 + rh, x0 : x0 + rw] = rng.integers(0, 256, size=(rh, rw, 3), dtype=np.int64).astype(np.uint8)
    return out


def _p_griddistort(img, p, rng, partner):
    h, w = img.shape[:2]
    g = p["grid"]
    mag = p["magnitude"]
    ctrl = rng.uniform(-1.0, 1.0, size=(g + 1, g + 1, 2))
    ctrl[:, :, 0] *= mag * h / g
    ctrl[:, :, 1] *= mag * w / g
    ys = np.linspace(0, g, h)
    xs = np.linspace(0, g, w)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    disp = bilinear_sample(ctrl, yy, xx)
    oy, ox = _out_grid(h, w)
    return _warp(img, oy + disp[:, :, 0], ox + disp[:, :, 1])


def _p_mosaic(img, p, rng, partner):
    h, w = img.shape[:2]
    rh = max(1, int(round(p["frac"] * h)))
    rw = max(1, int(round(p["frac"] * w)))
    y0 = int(round(p["py"] * (h - rh)))
    x0 = int(round(p["px"] * (w - rw)))
    out = img.copy()
    out[y0 : y0 + rh, x0 : x0 + rw] = _pixelate(img[y0 : y0 + rh, x0 : x0 + rw], p["block"])
    return out


def _p_voronoi(img, p, rng, partner):
    h, w = img.shape[:2]
    n = min(p["npoints"], h * w)
    py = rng.uniform(0, h, size=n)
    px = rng.uniform(0, w, size=n)
    yy, xx = _out_grid(h, w)
    d = (yy[:, :, None] - py[None, None, :]) ** 2 + (xx[:, :, None] - px[None, None, :]) ** 2
    labels = np.argmin(d, axis=2).ravel()
    f = img.reshape(-1, 3).astype(np.float64)
    counts = np.bincount(labels, minlength=n).astype(np.float64)
    counts[counts == 0] = 1.0
    out = np.empty_like(f)
    for c in range(3):
        sums = np.bincount(labels, weights=f[:, c], minlength=n)
        out[:, c] = (sums / counts)[labels]
    return to_uint8(out.reshape(h, w, 3))


def _p_pyramid(img, p, rng, partner):
    h, w = img.shape[:2]
    out = img.copy()
    for level in range(1, p["levels"]):
        sh, sw = max(1, h >> level), max(1, w >> level)
        small = resize_bilinear(img, sh, sw)
        y0, x0 = (h - sh) // 2, (w - sw) // 2
        out[y0 : y0 + sh, x0 : x0 + sw] = small
    return out


def _p_swirl(img, p, rng, partner):
    h, w = img.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    radius = p["radius"] * min(h, w) / 2.0
    yy, xx = _out_grid(h, w)
    dy, dx = yy - cy, xx - cx
    rho = np.sqrt(dy * dy + dx * dx)
    theta = p["strength"] * np.exp(-rho / max(radius / 3.0, 1e-9))
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    src_y = cy + dy * cos_t - dx * sin_t
    src_x = cx + dy * sin_t + dx * cos_t
    return _warp(img, src_y, src_x)


def _p_waveblock(img, p, rng, partner):
    h = img.shape[0]
    bh = max(1, int(round(p["band"] * h)))
    y0 = int(round(p["offset"] * (h - bh)))
    out = img.astype(np.float64)
    out[y0 : y0 + bh] *= p["factor"]
    return to_uint8(out)


def _p_oilpaint(img, p, rng, partner):
    levels, radius = p["levels"], p["radius"]
    size = 2 * radius + 1
    f = img.astype(np.float64)
    q = np.clip((luma601(img) / 256.0 * levels).astype(np.int64), 0, levels - 1)
    counts = np.empty((levels,) + q.shape)
    sums = np.empty((levels,) + q.shape + (3,))
    for lv in range(levels):
        mask = (q == lv).astype(np.float64)
        counts[lv] = ndimage.uniform_filter(mask, size=size, mode="nearest")
        for c in range(3):
            sums[lv, :, :, c] = ndimage.uniform_filter(mask * f[:, :, c], size=size, mode="nearest")
    mode = np.argmax(counts, axis=0)
    iy, ix = np.indices(q.shape)
    denom = np.maximum(counts[mode, iy, ix], 1e-12)[..., None]
    return to_uint8(sums[mode, iy, ix] / denom)


# ---------------------------------------------------------------------------
# catalog

_CATALOG = [
    ("ResizeCrop", "geometric", "base", {"frac": _f(0.5, 1.0), "cy": _f(0, 1), "cx": _f(0, 1)}, _p_resizecrop),
    ("Blend", "overlay", "base", {"alpha": _f(0.3, 0.8)}, _p_blend),
    ("GrayScale", "photometric", "base", {}, _p_grayscale),
    ("ColorJitter", "photometric", "base",
     {"brightness": _f(0.6, 1.4), "contrast": _f(0.6, 1.4), "saturation": _f(0.5, 1.5), "hue": _f(-0.1, 0.1)},
     _p_colorjitter),
    ("Blur", "photometric", "base", {"sigma": _f(0.6, 4.0)}, _p_blur),
    ("Pixelate", "photometric", "base", {"block": _i(4, 32), "oy_frac": _f(0, 1), "ox_frac": _f(0, 1)}, _p_pixelate),
    ("Rotate", "geometric", "base", {"angle": _f(-45.0, 45.0)}, _p_rotate),
    ("Padding", "geometric", "base",
     {"top": _f(0.05, 0.25), "bottom": _f(0.05, 0.25), "left": _f(0.05, 0.25), "right": _f(0.05, 0.25),
      "r": _i(0, 255), "g": _i(0, 255), "b": _i(0, 255)},
     _p_padding),
    ("AddNoise", "photometric", "base", {"sigma": _f(5.0, 30.0)}, _p_addnoise),
    ("VertFlip", "geometric", "base", {}, _p_vertflip),
    ("HoriFlip", "geometric", "base", {}, _p_horiflip),
    ("PerspChange", "geometric", "base",
     {k: _f(0.0, 0.2) for k in ("j0x", "j0y", "j1x", "j1y", "j2x", "j2y", "j3x", "j3y")},
     _p_perspchange),
    ("StackImage", "composite", "base", {"axis": _c("h", "w"), "order": _c("first", "second")}, _p_stackimage),
    ("ChangeChan", "photometric", "base",
     {"op": _c("swap_rg", "swap_gb", "swap_rb", "roll1", "roll2", "invert_r", "invert_g", "invert_b")},
     _p_changechan),
    ("EncQuality", "photometric", "base", {"quality": _i(10, 70)}, _p_encquality),
    ("AddStripes", "overlay", "base",
     {"orientation": _c("horizontal", "vertical"), "spacing": _i(8, 32), "width": _i(1, 6),
      "phase_frac": _f(0, 1), "r": _i(0, 255), "g": _i(0, 255), "b": _i(0, 255), "alpha": _f(0.5, 1.0)},
     _p_addstripes),
    ("Sharpen", "photometric", "base", {"amount": _f(0.5, 2.0)}, _p_sharpen),
    ("Skew", "geometric", "base", {"axis": _c("h", "v"), "angle": _f(-25.0, 25.0)}, _p_skew),
    ("ShufPixels", "composite", "base", {"frac": _f(0.1, 0.5)}, _p_shufpixels),
    ("AddShapes", "overlay", "base", {"count": _i(1, 5)}, _p_addshapes),
    ("Repeat", "composite", "base", {"reps": _c(2, 3)}, _p_repeat),
    ("CutAssemble", "composite", "base", {"grid": _i(2, 4)}, _p_cutassemble),
    ("CutPaste", "composite", "base", {"hfrac": _f(0.1, 0.3), "wfrac": _f(0.1, 0.3)}, _p_cutpaste),
    ("Solarize", "photometric", "base", {"threshold": _i(64, 192)}, _p_solarize),
    ("Posterize", "photometric", "base", {"bits": _i(1, 4)}, _p_posterize),
    ("Gamma", "photometric", "base", {"gamma": _f(0.4, 2.5)}, _p_gamma),
    ("Erasing", "overlay", "base",
     {"area": _f(0.05, 0.3), "aspect": _f(0.5, 2.0), "fill": _c("color", "noise"),
      "r": _i(0, 255), "g": _i(0, 255), "b": _i(0, 255)},
     _p_erasing),
    ("GridDistort", "geometric", "base", {"grid": _i(3, 6), "magnitude": _f(0.05, 0.2)}, _p_griddistort),
    ("Mosaic", "photometric", "novel", {"frac": _f(0.3, 0.7), "py": _f(0, 1), "px": _f(0, 1), "block": _i(6, 24)}, _p_mosaic),
    ("Voronoi", "composite", "novel", {"npoints": _i(20, 80)}, _p_voronoi),
    ("Pyramid", "composite", "novel", {"levels": _i(2, 4)}, _p_pyramid),
    ("Swirl", "geometric", "novel", {"strength": _f(1.0, 4.0), "radius": _f(0.5, 1.0)}, _p_swirl),
    ("WaveBlock", "photometric", "novel", {"band": _f(0.2, 0.4), "offset": _f(0, 1), "factor": _f(0.3, 0.7)}, _p_waveblock),
    ("OilPaint", "photometric", "novel", {"levels": _i(6, 10), "radius": _i(2, 4)}, _p_oilpaint),
]

_DESCRIPTORS = [PatternDescriptor(pid, cat, split, schema) for pid, cat, split, schema, _fn in _CATALOG]
_FUNCS = {pid: fn for pid, _c_, _s_, _sc_, fn in _CATALOG}
_BY_ID = {d.id: d for d in _DESCRIPTORS}

# patterns whose apply consumes a partner image
PARTNER_PATTERNS = frozenset({"Blend", "StackImage"})

assert len(_BY_ID) == len(_DESCRIPTORS), "duplicate pattern ids"
assert not ({d.id for d in _DESCRIPTORS if d.split == "base"}
            & {d.id for d in _DESCRIPTORS if d.split == "novel"}), "base/novel overlap"


def catalog() -> list[PatternDescriptor]:
    """All 34 pattern descriptors in stable order (28 base, then 6 novel)."""
    return list(_DESCRIPTORS)


def descriptor(pattern_id: str) -> PatternDescriptor:
    try:
        return _BY_ID[pattern_id]
    except KeyError:
        raise CatalogError(f"unknown pattern id {pattern_id!r}") from None


def split_ids(split: str) -> list[str]:
    return [d.id for d in _DESCRIPTORS if d.split == split]


def _sample_value(spec, rng):
    if spec["kind"] == "float":
        return float(rng.uniform(spec["low"], spec["high"]))
    if spec["kind"] == "int":
        return int(rng.integers(spec["low"], spec["high"] + 1))
    return spec["options"][int(rng.integers(len(spec["options"])))]


def _check_value(name, spec, value):
    if spec["kind"] == "float":
        if not isinstance(value, (int, float)) or not spec["low"] <= value <= spec["high"]:
            raise ParamError(f"{name}={value!r} outside [{spec['low']}, {spec['high']}]")
    elif spec["kind"] == "int":
        if not isinstance(value, int) or not spec["low"] <= value <= spec["high"]:
            raise ParamError(f"{name}={value!r} outside [{spec['low']}, {spec['high']}]")
    elif value not in spec["options"]:
        raise ParamError(f"{name}={value!r} not one of {spec['options']}")


def validate_params(pattern_id: str, params: dict) -> None:
    schema = descriptor(pattern_id).param_schema
    extra = set(params) - set(schema)
    if extra:
        raise ParamError(f"unknown params for {pattern_id}: {sorted(extra)}")
    missing = set(schema) - set(params)
    if missing:
        raise ParamError(f"missing params for {pattern_id}: {sorted(missing)}")
    for name, spec in schema.items():
        _check_value(name, spec, params[name])


def sample_instance(pattern_id: str, seed: int) -> PatternInstance:
    """Draw concrete parameters for one pattern, keyed only by `seed`."""
    schema = descriptor(pattern_id).param_schema
    rng = make_rng(seed)
    params = {name: _sample_value(spec, rng) for name, spec in schema.items()}
    return PatternInstance(pattern_id=pattern_id, params=params, seed=int(seed))


def apply(image: np.ndarray, instance: PatternInstance, partner: np.ndarray | None = None) -> np.ndarray:
    """Apply one pattern instance; deterministic given the instance."""
    validate_image(image)
    fn = _FUNCS.get(instance.pattern_id)
    if fn is None:
        raise CatalogError(f"unknown pattern id {instance.pattern_id!r}")
    validate_params(instance.pattern_id, instance.params)
    rng = make_rng(derive_seed(instance.seed, instance.pattern_id + ":apply", 0))
    if instance.pattern_id in PARTNER_PATTERNS:
        partner = _partner_for(image, partner, instance.seed, instance.pattern_id)
    out = fn(image, instance.params, rng, partner)
    if out.shape[0] < 1 or out.shape[1] < 1:
        raise PatternError(f"{instance.pattern_id} produced a degenerate {out.shape} output")
    return validate_image(np.ascontiguousarray(out))


def apply_combo(image: np.ndarray, combo: PatternCombo, partner: np.ndarray | None = None) -> np.ndarray:
    """Left-to-right fold of `apply` over the combo's instances."""
    out = image
    for inst in combo.instances:
        out = apply(out, inst, partner=partner)
    return out
