"""Annotated face image -> fixed-size single-channel eye patches.

Two crop paths: a geometric ROI cut from the face bounding box, and a
landmark crop framed by the eye-corner points. Includes the minimal raster
codec (binary PGM/PPM) the pipeline ingests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# patch sizes as (rows, cols); both overridable through the run config
ROI_PATCH_HW = (42, 50)
ERT_PATCH_HW = (15, 25)

# eye ROI as fractions of the face box: x offsets for the image-left and
# image-right eye, shared y offset, and the box extents
DEFAULT_ROI_FRACTIONS = (0.12, 0.56, 0.22, 0.32, 0.26)

# landmark crop extents as multiples of the eye-corner distance (w, h)
DEFAULT_LANDMARK_MARGINS = (1.5, 0.9)


@dataclass(frozen=True)
class Box:
    """Axis-aligned pixel rectangle: top-left corner plus extents."""

    x: int
    y: int
    w: int
    h: int


@dataclass(frozen=True)
class EyeLandmarks:
    """Eye-corner points (x, y); left/right refer to the image's sides."""

    left_outer: tuple[float, float]
    left_inner: tuple[float, float]
    right_inner: tuple[float, float]
    right_outer: tuple[float, float]


def _round_px(v: float) -> int:
    """Round to nearest pixel, halves away from the origin-side."""
    return int(math.floor(v + 0.5))


# --------------------------------------------------------------------------
# PGM / PPM codec (binary P5 / P6, 8-bit)
# --------------------------------------------------------------------------

def _next_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comments that run to end of line
    n = len(buf)
    while pos < n:
        ch = buf[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ValueError("truncated PNM header")
    return buf[start:pos], pos


def read_pnm(path) -> np.ndarray:
    """Reads binary PGM (P5) or PPM (P6); returns uint8 (H,W) or (H,W,3)."""
    with open(path, "rb") as f:
        buf = f.read()
    magic, pos = _next_token(buf, 0)
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"{path}: unsupported raster format {magic!r}")
    fields = []
    for _ in range(3):
        tok, pos = _next_token(buf, pos)
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ValueError(f"{path}: bad dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise ValueError(f"{path}: only 8-bit rasters supported (maxval {maxval})")
    pos += 1  # single whitespace byte after maxval
    channels = 1 if magic == b"P5" else 3
    count = width * height * channels
    raster = buf[pos : pos + count]
    if len(raster) != count:
        raise ValueError(f"{path}: raster truncated")
    img = np.frombuffer(raster, dtype=np.uint8)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return img.reshape(shape).copy()


def write_pgm(path, img: np.ndarray) -> None:
    if img.ndim != 2:
        raise ValueError("PGM output needs a single-channel image")
    data = np.ascontiguousarray(img, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{data.shape[1]} {data.shape[0]}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def write_ppm(path, img: np.ndarray) -> None:
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("PPM output needs an interleaved 3-channel image")
    data = np.ascontiguousarray(img, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(f"P6\n{data.shape[1]} {data.shape[0]}\n255\n".encode("ascii"))
        f.write(data.tobytes())


# --------------------------------------------------------------------------
# pixel operations
# --------------------------------------------------------------------------

def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Rec.601 luma (0.299, 0.587, 0.114); 1-channel input passes through."""
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] == 3:
        luma = (
            0.299 * img[..., 0].astype(np.float64)
            + 0.587 * img[..., 1]
            + 0.114 * img[..., 2]
        )
        return np.floor(luma + 0.5).astype(np.uint8)
    raise ValueError(f"unsupported channel layout for shape {img.shape}")


def resize_bilinear(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resample with half-pixel-center sampling and edge clamping.

    Output pixel (i, j) samples the source at
    ((j+0.5)*w/out_w - 0.5, (i+0.5)*h/out_h - 0.5). Returns float32.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError(f"empty resize target {out_w}x{out_h}")
    if img.ndim == 3:
        planes = [resize_bilinear(img[..., c], out_w, out_h) for c in range(img.shape[2])]
        return np.stack(planes, axis=-1)
    h, w = img.shape
    src = img.astype(np.float64, copy=False)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = (ys - y0)[:, None]
    v00 = src[y0[:, None], x0[None, :]]
    v01 = src[y0[:, None], x1[None, :]]
    v10 = src[y1[:, None], x0[None, :]]
    v11 = src[y1[:, None], x1[None, :]]
    # lerp form keeps constant inputs exactly constant
    top = v00 + (v01 - v00) * fx
    bottom = v10 + (v11 - v10) * fx
    return (top + (bottom - top) * fy).astype(np.float32)


def geometric_eye_rois(
    face: Box, fractions: tuple[float, float, float, float, float] = DEFAULT_ROI_FRACTIONS
) -> tuple[Box, Box]:
    """Eye boxes cut from the face box at fixed fractional offsets.

    Returns (image-left eye, image-right eye). Affine in the face box, so the
    result is translation- and scale-equivariant.
    """
    if face.w <= 0 or face.h <= 0:
        raise ValueError(f"degenerate face box {face}")
    left_fx, right_fx, top_f, w_f, h_f = fractions
    w = _round_px(w_f * face.w)
    h = _round_px(h_f * face.h)
    y = _round_px(face.y + top_f * face.h)
    left = Box(_round_px(face.x + left_fx * face.w), y, w, h)
    right = Box(_round_px(face.x + right_fx * face.w), y, w, h)
    return left, right


def landmark_eye_crop(
    inner: tuple[float, float],
    outer: tuple[float, float],
    margins: tuple[float, float] = DEFAULT_LANDMARK_MARGINS,
) -> Box:
    """Axis-aligned box around the eye-corner midpoint, sized by corner distance."""
    dx, dy = outer[0] - inner[0], outer[1] - inner[1]
    d = math.hypot(dx, dy)
    if d == 0:
        raise ValueError("coincident eye corners")
    w_factor, h_factor = margins
    cx = (inner[0] + outer[0]) / 2
    cy = (inner[1] + outer[1]) / 2
    return Box(
        _round_px(cx - w_factor * d / 2),
        _round_px(cy - h_factor * d / 2),
        _round_px(w_factor * d),
        _round_px(h_factor * d),
    )


def crop(img: np.ndarray, box: Box) -> np.ndarray:
    """Sub-image under the box clamped to image bounds; empty overlap is an error."""
    h, w = img.shape[:2]
    x0, y0 = max(box.x, 0), max(box.y, 0)
    x1, y1 = min(box.x + box.w, w), min(box.y + box.h, h)
    if x1 <= x0 or y1 <= y0:
        raise ValueError(f"crop box {box} lies outside the {w}x{h} image")
    return img[y0:y1, x0:x1].copy()


def normalize(img: np.ndarray) -> np.ndarray:
    """8-bit-scale patch -> float32 tensor (1, H, W) with values in [-0.5, 0.5]."""
    if img.ndim != 2:
        raise ValueError("normalize expects a single-channel image")
    t = img.astype(np.float32) / np.float32(255) - np.float32(0.5)
    return t[None, :, :]
