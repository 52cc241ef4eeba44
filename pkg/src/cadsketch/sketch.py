"""Weighted-Canny sketch synthesis and the edge-operator variants.

A sketch is the weighted average of two branches computed on the gray
input G:

  O1: binary-thresholded Gaussian dodge. Invert G, blur the inversion,
      then divide G by the inverted blur (scaled, epsilon-guarded) and
      threshold. This suppresses interior detail and keeps pencil-like
      boundary shading.
  O2: an edge map. Canny (with optional non-maximum suppression and
      hysteresis) by default, or a single-threshold Sobel / Scharr /
      Prewitt / Roberts magnitude map.

The output uses dark strokes on a light background, so the raw edge map
(white-on-black) is inverted before blending. Both branches and the blend
are pure functions; identical inputs give bit-identical sketches.
"""

from __future__ import annotations

import collections
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch, ImageTooSmall, InvalidParams
from .image import GrayImage, as_gray, check_same_shape

OP_CANNY = "canny"
OP_SOBEL = "sobel"
OP_SCHARR = "scharr"
OP_PREWITT = "prewitt"
OP_ROBERTS = "roberts"

OPERATORS = (OP_CANNY, OP_SOBEL, OP_SCHARR, OP_PREWITT, OP_ROBERTS)

# 3x3 derivative kernels (correlation convention), x = columns left->right.
_KX = {
    OP_SOBEL: np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64),
    OP_SCHARR: np.array([[-3, 0, 3], [-10, 0, 10], [-3, 0, 3]], dtype=np.float64),
    OP_PREWITT: np.array([[-1, 0, 1], [-1, 0, 1], [-1, 0, 1]], dtype=np.float64),
}

# Pre-smoothing inside the Canny stage.
_CANNY_BLUR_K = 5
_CANNY_BLUR_SIGMA = 1.4


@dataclass(frozen=True)
class SketchParams:
    """Every tunable of the sketch generator.

    blend_weight_o1 is the weight of the dodge branch O1; the edge branch
    gets 1 - w. The default weight is deliberately small so the output
    stays close to the edge map.
    """

    gaussian_kernel: int = 21
    gaussian_sigma: float = 6.0
    dodge_scale: float = 256.0
    binary_threshold: int = 245
    canny_low: float = 50.0
    canny_high: float = 150.0
    operator: str = OP_CANNY
    nms_enabled: bool = True
    blend_weight_o1: float = 0.15

    def __post_init__(self):
        if self.gaussian_kernel < 3 or self.gaussian_kernel % 2 == 0:
            raise InvalidParams(f"kernel size must be odd and >= 3, got {self.gaussian_kernel}")
        if self.gaussian_sigma <= 0:
            raise InvalidParams(f"sigma must be positive, got {self.gaussian_sigma}")
        if not 0 <= self.canny_low <= self.canny_high <= 255 * 4:
            raise InvalidParams(
                f"need 0 <= low <= high <= 1020, got ({self.canny_low}, {self.canny_high})"
            )
        if not 0 <= self.binary_threshold <= 255:
            raise InvalidParams(f"threshold must be in 0..255, got {self.binary_threshold}")
        if self.operator not in OPERATORS:
            raise InvalidParams(f"unknown operator {self.operator!r}")
        if not 0.0 <= self.blend_weight_o1 <= 1.0:
            raise InvalidParams(f"blend weight must be in [0, 1], got {self.blend_weight_o1}")

    def with_operator(self, operator: str, nms_enabled: bool | None = None) -> "SketchParams":
        kwargs = {"operator": operator}
        if nms_enabled is not None:
            kwargs["nms_enabled"] = nms_enabled
        return replace(self, **kwargs)


def gaussian_kernel_1d(k: int, sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian with k taps centered on zero."""
    if k < 3 or k % 2 == 0:
        raise InvalidParams(f"kernel size must be odd and >= 3, got {k}")
    if sigma <= 0:
        raise InvalidParams(f"sigma must be positive, got {sigma}")
    x = np.arange(k, dtype=np.float64) - (k - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _convolve_axis(img: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    """Separable 1-D correlation along one axis with reflect-101 borders."""
    half = len(kernel) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (half, half)
    padded = np.pad(img, pad, mode="reflect")
    out = np.zeros_like(img, dtype=np.float64)
    for t, w in enumerate(kernel):
        if axis == 0:
            out += w * padded[t:t + img.shape[0], :]
        else:
            out += w * padded[:, t:t + img.shape[1]]
    return out


def gaussian_blur_float(img: np.ndarray, k: int, sigma: float) -> np.ndarray:
    g = gaussian_kernel_1d(k, sigma)
    return _convolve_axis(_convolve_axis(np.asarray(img, dtype=np.float64), g, 0), g, 1)


def gaussian_blur(img: GrayImage, k: int, sigma: float) -> GrayImage:
    """Separable Gaussian blur of an 8-bit image (reflect borders)."""
    img = as_gray(img)
    out = gaussian_blur_float(img, k, sigma)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def invert(img: GrayImage) -> GrayImage:
    return (255 - as_gray(img)).astype(np.uint8)


def dodge_divide(g: GrayImage, ib: GrayImage, scale: float = 256.0) -> GrayImage:
    """Color dodge of g by the blurred inversion ib:
    out = clamp(g * scale / (255 - ib + 1), 0, 255).

    The +1 keeps the division defined where ib hits 255.
    """
    g = as_gray(g)
    ib = as_gray(ib)
    check_same_shape(g, ib)
    denom = 255.0 - ib.astype(np.float64) + 1.0
    out = g.astype(np.float64) * scale / denom
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def binary_threshold(img: GrayImage, t: int) -> GrayImage:
    """p > t -> 255, else 0."""
    return np.where(as_gray(img) > t, 255, 0).astype(np.uint8)


def edge_gradient(img: GrayImage, operator: str = OP_SOBEL):
    """Per-pixel gradient magnitude and orientation for one operator.

    Returns (magnitude, orientation) float64 arrays; orientation is
    atan2(gy, gx) in radians. The 3x3 kernels use reflect borders;
    Roberts evaluates each 2x2 window at its top-left pixel, leaving the
    last row and column zero.
    """
    img = as_gray(img).astype(np.float64)
    if operator == OP_ROBERTS:
        if img.shape[0] < 2 or img.shape[1] < 2:
            raise ImageTooSmall("Roberts needs at least a 2x2 image")
        gx = np.zeros_like(img)
        gy = np.zeros_like(img)
        # 2x2 kernels evaluated at the top-left pixel of each window.
        gx[:-1, :-1] = img[:-1, :-1] - img[1:, 1:]
        gy[:-1, :-1] = img[:-1, 1:] - img[1:, :-1]
    else:
        if operator == OP_CANNY:
            operator = OP_SOBEL  # the Canny stage uses Sobel derivatives
        if operator not in _KX:
            raise InvalidParams(f"unknown operator {operator!r}")
        if img.shape[0] < 3 or img.shape[1] < 3:
            raise ImageTooSmall(f"{operator} needs at least a 3x3 image")
        kx = _KX[operator]
        gx = _correlate2d_3x3(img, kx)
        gy = _correlate2d_3x3(img, kx.T)
    magnitude = np.hypot(gx, gy)
    orientation = np.arctan2(gy, gx)
    return magnitude, orientation


def _correlate2d_3x3(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    padded = np.pad(img, 1, mode="reflect")
    out = np.zeros_like(img)
    h, w = img.shape
    for dy in range(3):
        for dx in range(3):
            k = kernel[dy, dx]
            if k != 0.0:
                out += k * padded[dy:dy + h, dx:dx + w]
    return out


def _nms(mag: np.ndarray, orient: np.ndarray) -> np.ndarray:
    """4-direction quantized non-maximum suppression.

    A pixel survives when it is >= its backward neighbor and strictly >
    its forward neighbor along the quantized gradient direction. The
    asymmetric comparison breaks the exact ties a symmetric smoothed step
    produces, thinning plateau ridges to one pixel.
    """
    h, w = mag.shape
    padded = np.pad(mag, 1, mode="constant")

    def shifted(dy, dx):
        return padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]

    angle = np.degrees(orient) % 180.0
    sector = np.zeros((h, w), dtype=np.uint8)            # 0 deg: E-W
    sector[(angle >= 22.5) & (angle < 67.5)] = 1         # 45 deg
    sector[(angle >= 67.5) & (angle < 112.5)] = 2        # 90 deg: N-S
    sector[(angle >= 112.5) & (angle < 157.5)] = 3       # 135 deg

    # Forward neighbor offsets per sector (rows grow downward, so +45 deg
    # in image coordinates is down-right).
    fwd = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}
    keep = np.zeros((h, w), dtype=bool)
    for s, (dy, dx) in fwd.items():
        m = sector == s
        keep |= m & (mag > shifted(dy, dx)) & (mag >= shifted(-dy, -dx))
    return np.where(keep, mag, 0.0)


def _thin_corners(edges: np.ndarray) -> np.ndarray:
    """Remove staircase corner pixels from a 1-px edge map.

    A pixel with exactly two set 8-neighbors that are themselves mutually
    8-adjacent is an L-corner; dropping it keeps the curve connected but
    gives every remaining pixel exactly two neighbors. All removals are
    decided on the input mask at once, so the pass is order-independent.
    """
    h, w = edges.shape
    padded = np.pad(edges, 1)
    offsets = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    neighbors = np.stack([
        padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w] for dy, dx in offsets
    ])
    counts = neighbors.sum(axis=0)
    removable = np.zeros_like(edges)
    two = edges & (counts == 2)
    if two.any():
        ys, xs = np.nonzero(two)
        for y, x in zip(ys, xs):
            hood = [(y + dy, x + dx) for dy, dx in offsets
                    if 0 <= y + dy < h and 0 <= x + dx < w and edges[y + dy, x + dx]]
            (ay, ax), (by, bx) = hood
            if max(abs(ay - by), abs(ax - bx)) == 1:
                removable[y, x] = True
    return edges & ~removable


def _hysteresis(mag: np.ndarray, low: float, high: float) -> np.ndarray:
    """Double threshold plus 8-connected edge tracking. Returns bool map."""
    strong = mag > high
    candidate = mag > low
    if not strong.any():
        return strong
    h, w = mag.shape
    visited = strong.copy()
    queue = collections.deque(zip(*np.nonzero(strong)))
    while queue:
        y, x = queue.popleft()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and candidate[ny, nx] and not visited[ny, nx]:
                    visited[ny, nx] = True
                    queue.append((ny, nx))
    return visited


def canny(img: GrayImage, low: float, high: float, nms: bool = True) -> GrayImage:
    """Canny edge map: Gaussian pre-smooth, Sobel gradients, optional
    non-maximum suppression, double threshold with 8-connected hysteresis.
    Edges are 255 on a 0 background."""
    if low > high:
        raise InvalidParams(f"low threshold {low} exceeds high {high}")
    img = as_gray(img)
    smoothed = gaussian_blur_float(img, _CANNY_BLUR_K, _CANNY_BLUR_SIGMA)
    kx = _KX[OP_SOBEL]
    gx = _correlate2d_3x3(smoothed, kx)
    gy = _correlate2d_3x3(smoothed, kx.T)
    mag = np.hypot(gx, gy)
    if nms:
        mag = _nms(mag, np.arctan2(gy, gx))
    edges = _hysteresis(mag, low, high)
    if nms:
        edges = _thin_corners(edges)
    return np.where(edges, 255, 0).astype(np.uint8)


def _edge_branch(gray: GrayImage, params: SketchParams) -> GrayImage:
    """O2: white-on-black edge map for the configured operator."""
    if params.operator == OP_CANNY:
        return canny(gray, params.canny_low, params.canny_high, params.nms_enabled)
    mag, _ = edge_gradient(gray, params.operator)
    return np.where(mag > params.canny_high, 255, 0).astype(np.uint8)


def generate_sketch(img: GrayImage, params: SketchParams | None = None) -> GrayImage:
    """Full sketch synthesis: S = round(w * O1 + (1 - w) * invert(O2)).

    RGB input is collapsed to grayscale first. Output polarity is dark
    strokes on a light background.
    """
    if params is None:
        params = SketchParams()
    gray = as_gray(img)
    blurred = gaussian_blur(invert(gray), params.gaussian_kernel, params.gaussian_sigma)
    dodged = dodge_divide(gray, blurred, params.dodge_scale)
    o1 = binary_threshold(dodged, params.binary_threshold)
    o2_dark = invert(_edge_branch(gray, params))
    w = params.blend_weight_o1
    blend = w * o1.astype(np.float64) + (1.0 - w) * o2_dark.astype(np.float64)
    return np.clip(np.rint(blend), 0, 255).astype(np.uint8)
