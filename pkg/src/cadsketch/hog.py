"""Histogram-of-oriented-gradients descriptors and their binary store.

Descriptors use centered [-1, 0, 1] gradients, unsigned orientations
folded into 0..180 degrees, magnitude-weighted linear binning into 8
bins per 8x8 cell, and per-cell L2 normalization (the configured 1x1
blocks make block normalization degenerate to per-cell). Images are
resized to 256x256 before extraction so sketch and view descriptors
always share one dimensionality: 32 * 32 * 8 = 8192.

The feature store is a little-endian binary file:

  magic "CSKN" | version u16 | dim u32 | count u32
  per record: model_id (u16 length-prefixed UTF-8) | class id u16 |
              view index u8 | dim * f32
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionNotDivisible, InvalidParams, MalformedFile
from .image import GrayImage, as_gray, resize_bilinear

HOG_INPUT_SIZE = 256

STORE_MAGIC = b"CSKN"
STORE_VERSION = 1

BLOCK_NORM_L2 = "L2"
BLOCK_NORM_L2HYS = "L2Hys"

_NORM_EPS = 1e-12
_L2HYS_CLIP = 0.2


@dataclass(frozen=True)
class HogParams:
    pixels_per_cell: tuple = (8, 8)
    cells_per_block: tuple = (1, 1)
    orientations: int = 8
    block_norm: str = BLOCK_NORM_L2
    signed: bool = False

    def __post_init__(self):
        if self.orientations < 2:
            raise InvalidParams(f"need at least 2 orientation bins, got {self.orientations}")
        if self.block_norm not in (BLOCK_NORM_L2, BLOCK_NORM_L2HYS):
            raise InvalidParams(f"unknown block norm {self.block_norm!r}")
        if self.cells_per_block != (1, 1):
            raise InvalidParams("only 1x1 blocks are supported")
        cy, cx = self.pixels_per_cell
        if cy < 2 or cx < 2:
            raise InvalidParams(f"cell size too small: {self.pixels_per_cell}")

    def descriptor_length(self, height: int = HOG_INPUT_SIZE,
                          width: int = HOG_INPUT_SIZE) -> int:
        cy, cx = self.pixels_per_cell
        return (height // cy) * (width // cx) * self.orientations


def _centered_gradients(img: np.ndarray):
    padded = np.pad(img, 1, mode="reflect")
    h, w = img.shape
    gx = padded[1:1 + h, 2:] - padded[1:1 + h, :-2]
    gy = padded[2:, 1:1 + w] - padded[:-2, 1:1 + w]
    return gx, gy


def hog(img: GrayImage, params: HogParams | None = None) -> np.ndarray:
    """Descriptor of an image whose dimensions divide the cell size.

    Layout is (cells_y, cells_x, orientations) flattened row-major.
    The unsigned fold negates (gx, gy) into the upper half-plane before
    atan2, which keeps the descriptor bit-identical under intensity
    inversion.
    """
    if params is None:
        params = HogParams()
    img = as_gray(img).astype(np.float64)
    h, w = img.shape
    cell_y, cell_x = params.pixels_per_cell
    if h % cell_y or w % cell_x:
        raise DimensionNotDivisible(
            f"image {h}x{w} not divisible by cell {cell_y}x{cell_x}"
        )
    gx, gy = _centered_gradients(img)
    if not params.signed:
        flip = (gy < 0) | ((gy == 0) & (gx < 0))
        gx = np.where(flip, -gx, gx)
        gy = np.where(flip, -gy, gy)
        span = 180.0
    else:
        span = 360.0
    mag = np.hypot(gx, gy)
    deg = np.degrees(np.arctan2(gy, gx)) % span

    nbins = params.orientations
    width = span / nbins
    pos = deg / width
    lo = np.floor(pos)
    frac = pos - lo
    lo = lo.astype(np.intp) % nbins
    hi = (lo + 1) % nbins

    cells_y = h // cell_y
    cells_x = w // cell_x
    hist = np.zeros((cells_y, cells_x, nbins))

    def accumulate(bins, weight):
        for b in range(nbins):
            contrib = np.where(bins == b, weight, 0.0)
            hist[:, :, b] += contrib.reshape(cells_y, cell_y, cells_x, cell_x).sum(axis=(1, 3))

    accumulate(lo, mag * (1.0 - frac))
    accumulate(hi, mag * frac)

    norms = np.sqrt(np.sum(hist * hist, axis=2, keepdims=True) + _NORM_EPS ** 2)
    out = hist / norms
    if params.block_norm == BLOCK_NORM_L2HYS:
        out = np.minimum(out, _L2HYS_CLIP)
        norms = np.sqrt(np.sum(out * out, axis=2, keepdims=True) + _NORM_EPS ** 2)
        out = out / norms
    return out.ravel()


def compute_descriptor(img: GrayImage, params: HogParams | None = None) -> np.ndarray:
    """Resize to the canonical 256x256 input, then extract, as float32.

    float32 is the store precision; using it in memory too keeps fresh
    and reloaded indexes bit-identical.
    """
    resized = resize_bilinear(as_gray(img), HOG_INPUT_SIZE, HOG_INPUT_SIZE)
    return hog(resized, params).astype(np.float32)


def extract_bag(views, params: HogParams | None = None) -> list:
    """One descriptor per view image, in view order."""
    images = views.images if hasattr(views, "images") else list(views)
    return [compute_descriptor(im, params) for im in images]


def write_feature_store(path, records, dim: int) -> None:
    """records: iterable of (model_id, class_id, view_index, vector)."""
    chunks = [STORE_MAGIC, struct.pack("<H", STORE_VERSION), struct.pack("<I", dim)]
    body = []
    count = 0
    for model_id, class_id, view_index, vector in records:
        vec = np.asarray(vector, dtype="<f4")
        if vec.shape != (dim,):
            raise ValueError(f"vector for {model_id!r} has shape {vec.shape}, expected ({dim},)")
        mid = model_id.encode("utf-8")
        body.append(struct.pack("<H", len(mid)) + mid
                    + struct.pack("<HB", class_id, view_index)
                    + vec.tobytes())
        count += 1
    chunks.append(struct.pack("<I", count))
    chunks.extend(body)
    data = b"".join(chunks)
    with open(path, "wb") as fh:
        fh.write(data)


def read_feature_store(path):
    """Returns (dim, records) with records as written."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 14 or data[:4] != STORE_MAGIC:
        raise MalformedFile("not a feature store (bad magic)", offset=0)
    (version,) = struct.unpack_from("<H", data, 4)
    if version != STORE_VERSION:
        raise MalformedFile(f"unsupported store version {version}", offset=4)
    (dim,) = struct.unpack_from("<I", data, 6)
    (count,) = struct.unpack_from("<I", data, 10)
    pos = 14
    records = []
    vec_bytes = dim * 4
    for _ in range(count):
        if pos + 2 > len(data):
            raise MalformedFile("truncated feature store", offset=pos)
        (mid_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        end = pos + mid_len + 3 + vec_bytes
        if end > len(data):
            raise MalformedFile("truncated feature store", offset=pos)
        model_id = data[pos:pos + mid_len].decode("utf-8")
        pos += mid_len
        class_id, view_index = struct.unpack_from("<HB", data, pos)
        pos += 3
        vector = np.frombuffer(data, dtype="<f4", count=dim, offset=pos).copy()
        pos += vec_bytes
        records.append((model_id, class_id, view_index, vector))
    return dim, records
