"""8-bit grayscale raster handling.

A gray image is a 2-D numpy uint8 array, shape (height, width), 0 = black
and 255 = white. Every stage of the pipeline (rendering, sketching,
metrics, features) trades in this one currency.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import DimensionMismatch

GrayImage = np.ndarray


def as_gray(img) -> GrayImage:
    """Coerce input to a uint8 grayscale array.

    2-D arrays are converted to uint8 (values clipped to 0..255);
    (h, w, 3) RGB arrays are collapsed with ITU-R 601 luma weights.
    """
    arr = np.asarray(img)
    if arr.ndim == 3 and arr.shape[2] in (3, 4):
        rgb = arr[..., :3].astype(np.float64)
        arr = rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D gray image, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    return arr


def check_same_shape(a: GrayImage, b: GrayImage) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"image shapes differ: {a.shape} vs {b.shape}")


def load_png(path) -> GrayImage:
    """Read a PNG (any mode) as 8-bit grayscale."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)


def save_png(img: GrayImage, path) -> None:
    """Write an 8-bit grayscale PNG. Byte-stable for identical pixels."""
    Image.fromarray(as_gray(img), mode="L").save(path, format="PNG")


def resize_bilinear(img: GrayImage, height: int, width: int) -> GrayImage:
    """Deterministic bilinear resize (align-corners-false convention)."""
    src = np.asarray(img, dtype=np.float64)
    h, w = src.shape
    if (h, w) == (height, width):
        return as_gray(img)
    # Sample positions of the destination pixel centers in source coords.
    ys = (np.arange(height) + 0.5) * (h / height) - 0.5
    xs = (np.arange(width) + 0.5) * (w / width) - 0.5
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = src[np.ix_(y0, x0)] * (1 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1 - fx) + src[np.ix_(y1, x1)] * fx
    out = top * (1 - fy) + bot * fy
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
