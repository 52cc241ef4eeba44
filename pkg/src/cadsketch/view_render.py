"""Multi-view orthographic rendering of a normalized mesh.

The camera set is the 20 vertices of a regular dodecahedron circumscribing
the model; each vertex direction yields one 256x256 grayscale view. The
renderer is a plain z-buffered software rasterizer with flat headlight
shading: foreground intensities span 30..225, the background is exactly
255, so silhouettes can be recovered with a simple != 255 test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMesh
from .image import GrayImage, save_png
from .mesh_io import TriangleMesh

VIEW_COUNT = 20
VIEW_EXTENT = 1.1  # half-width of the view volume; unit model + 10% margin
SHADE_MIN = 30
SHADE_MAX = 225
BACKGROUND = 255

POLICY_MAX_SILHOUETTE = "max-silhouette"
POLICY_MAX_ENTROPY = "max-entropy"
POLICY_MANUAL = "manual"


@dataclass(frozen=True)
class Viewpoint:
    """Unit camera direction plus an orthogonal up vector."""

    direction: np.ndarray
    up: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        u = np.asarray(self.up, dtype=np.float64)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("viewpoint direction must be unit length")
        if abs(float(d @ u)) > 1e-9 or abs(np.linalg.norm(u) - 1.0) > 1e-9:
            raise ValueError("up must be unit length and orthogonal to direction")
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "up", u)


@dataclass
class ViewSet:
    """The 20 rendered views of one model plus the chosen representative."""

    model_id: str
    images: list
    representative_index: int = 0

    def __post_init__(self):
        if len(self.images) != VIEW_COUNT:
            raise ValueError(f"a view set holds exactly {VIEW_COUNT} images")
        if not 0 <= self.representative_index < VIEW_COUNT:
            raise ValueError("representative index out of range")

    @property
    def representative(self) -> GrayImage:
        return self.images[self.representative_index]


def _up_for(direction: np.ndarray) -> np.ndarray:
    """Project global +Z onto the plane orthogonal to the direction;
    fall back to +Y when the direction is (anti)parallel to Z."""
    z = np.array([0.0, 0.0, 1.0])
    proj = z - float(z @ direction) * direction
    norm = np.linalg.norm(proj)
    if norm < 1e-6:
        return np.array([0.0, 1.0, 0.0])
    return proj / norm


def dodecahedron_viewpoints() -> list[Viewpoint]:
    """The 20 canonical dodecahedron vertices as unit view directions,
    in a fixed enumeration order (10 antipodal pairs)."""
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    inv = 1.0 / phi
    raw = []
    for x in (-1.0, 1.0):
        for y in (-1.0, 1.0):
            for z in (-1.0, 1.0):
                raw.append((x, y, z))
    for y in (-inv, inv):
        for z in (-phi, phi):
            raw.append((0.0, y, z))
    for x in (-inv, inv):
        for y in (-phi, phi):
            raw.append((x, y, 0.0))
    for x in (-phi, phi):
        for z in (-inv, inv):
            raw.append((x, 0.0, z))
    points = np.array(raw, dtype=np.float64)
    points /= np.linalg.norm(points, axis=1, keepdims=True)
    return [Viewpoint(p, _up_for(p)) for p in points]


def render_view(mesh: TriangleMesh, vp: Viewpoint, size: int = 256) -> GrayImage:
    """Orthographic z-buffered render of a normalized mesh along -direction."""
    if size < 1:
        raise ValueError("render size must be positive")
    if mesh.face_count < 1:
        raise DegenerateMesh("no renderable triangle")

    d = vp.direction
    up = vp.up
    right = np.cross(up, d)

    verts = mesh.vertices
    scale = size / (2.0 * VIEW_EXTENT)
    # Pixel centers sit at integer coordinates after this mapping.
    px = (verts @ right + VIEW_EXTENT) * scale - 0.5
    py = (VIEW_EXTENT - verts @ up) * scale - 0.5
    depth = verts @ d

    tri = mesh.faces
    ax, ay, az = px[tri[:, 0]], py[tri[:, 0]], depth[tri[:, 0]]
    bx, by, bz = px[tri[:, 1]], py[tri[:, 1]], depth[tri[:, 1]]
    cx, cy, cz = px[tri[:, 2]], py[tri[:, 2]], depth[tri[:, 2]]

    # Flat headlight shading, one intensity per face.
    e1 = verts[tri[:, 1]] - verts[tri[:, 0]]
    e2 = verts[tri[:, 2]] - verts[tri[:, 0]]
    normals = np.cross(e1, e2)
    nlen = np.linalg.norm(normals, axis=1)
    lam = np.zeros(len(tri))
    ok = nlen > 1e-15
    lam[ok] = np.abs(normals[ok] @ d) / nlen[ok]
    shades = np.rint(SHADE_MIN + lam * (SHADE_MAX - SHADE_MIN)).astype(np.uint8)

    denom = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay)

    img = np.full((size, size), BACKGROUND, dtype=np.uint8)
    zbuf = np.full((size, size), -np.inf)

    x0s = np.maximum(np.ceil(np.minimum(np.minimum(ax, bx), cx)), 0).astype(np.int64)
    x1s = np.minimum(np.floor(np.maximum(np.maximum(ax, bx), cx)), size - 1).astype(np.int64)
    y0s = np.maximum(np.ceil(np.minimum(np.minimum(ay, by), cy)), 0).astype(np.int64)
    y1s = np.minimum(np.floor(np.maximum(np.maximum(ay, by), cy)), size - 1).astype(np.int64)

    eps = 1e-9
    for i in range(len(tri)):
        if abs(denom[i]) < 1e-12:
            continue
        x0, x1, y0, y1 = x0s[i], x1s[i], y0s[i], y1s[i]
        if x1 < x0 or y1 < y0:
            continue
        xs = np.arange(x0, x1 + 1, dtype=np.float64)
        ys = np.arange(y0, y1 + 1, dtype=np.float64)[:, None]
        dx_a = xs - ax[i]
        dy_a = ys - ay[i]
        b = ((cy[i] - ay[i]) * dx_a - (cx[i] - ax[i]) * dy_a) / denom[i]
        c = ((bx[i] - ax[i]) * dy_a - (by[i] - ay[i]) * dx_a) / denom[i]
        a = 1.0 - b - c
        inside = (a >= -eps) & (b >= -eps) & (c >= -eps)
        if not inside.any():
            continue
        z = a * az[i] + b * bz[i] + c * cz[i]
        region = zbuf[y0:y1 + 1, x0:x1 + 1]
        win = inside & (z > region)
        if not win.any():
            continue
        region[win] = z[win]
        img[y0:y1 + 1, x0:x1 + 1][win] = shades[i]
    return img


def silhouette_area(img: GrayImage) -> int:
    """Number of non-background pixels."""
    return int(np.count_nonzero(img != BACKGROUND))


def image_entropy(img: GrayImage) -> float:
    hist = np.bincount(np.asarray(img, dtype=np.uint8).ravel(), minlength=256)
    p = hist[hist > 0] / hist.sum()
    return float(-(p * np.log2(p)).sum())


def select_representative(views, policy: str = POLICY_MAX_SILHOUETTE,
                          manual_index: int | None = None) -> int:
    """Pick one of the 20 views by policy; ties break to the lowest index."""
    images = views.images if isinstance(views, ViewSet) else list(views)
    if policy == POLICY_MANUAL:
        if manual_index is None or not 0 <= manual_index < len(images):
            raise ValueError("manual policy needs an index in 0..19")
        return manual_index
    if policy == POLICY_MAX_SILHOUETTE:
        scores = [silhouette_area(im) for im in images]
    elif policy == POLICY_MAX_ENTROPY:
        scores = [image_entropy(im) for im in images]
    else:
        raise ValueError(f"unknown representative policy {policy!r}")
    return int(np.argmax(scores))  # argmax returns the first maximum


def render_all_views(mesh: TriangleMesh, model_id: str = "",
                     size: int = 256,
                     policy: str = POLICY_MAX_SILHOUETTE,
                     manual_index: int | None = None) -> ViewSet:
    images = [render_view(mesh, vp, size) for vp in dodecahedron_viewpoints()]
    rep = select_representative(images, policy, manual_index)
    return ViewSet(model_id=model_id, images=images, representative_index=rep)


def write_view_pngs(views: ViewSet, out_dir) -> list:
    """Write <model_id>_viewNN.png for NN = 00..19 plus <model_id>_repr.png."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, img in enumerate(views.images):
        p = out / f"{views.model_id}_view{i:02d}.png"
        save_png(img, p)
        paths.append(p)
    repr_path = out / f"{views.model_id}_repr.png"
    save_png(views.representative, repr_path)
    paths.append(repr_path)
    return paths
