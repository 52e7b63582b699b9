"""Orthographic software rasterizer for the supported geom primitives.

Images are RGB8 numpy arrays; PNG encoding goes through Pillow. Rendering is
deterministic: geoms are painted back to front with a stable sort and no
anti-aliasing.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from ..errors import UnknownJoint
from ..mjcf import GeomPrimitive, RobotModel
from .fk import forward_kinematics, local_transform

FULL_SIZE = 512
ZOOM_SIZE = 256
ZOOM_PADDING = 0.20
FRAME_PADDING = 0.10
MIN_EXTENT = 0.05

BACKGROUND = (255, 255, 255)
PALETTE = (
    (70, 110, 180),
    (220, 120, 50),
    (80, 160, 90),
    (190, 60, 70),
    (140, 100, 180),
    (150, 110, 80),
    (210, 110, 170),
    (110, 110, 110),
    (170, 170, 50),
    (60, 170, 180),
)


@dataclass(frozen=True)
class Camera:
    """Orthographic view direction. Angles in degrees.

    The default looks at the robot's front: along +y with +x to the right
    and +z up. Positive elevation tilts the view downward.
    """

    azimuth: float = 0.0
    elevation: float = 0.0

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        a, e = math.radians(self.azimuth), math.radians(self.elevation)
        right = np.array([1.0, 0.0, 0.0])
        forward = np.array([0.0, 1.0, 0.0])
        up = np.array([0.0, 0.0, 1.0])
        forward, up = math.cos(e) * forward - math.sin(e) * up, math.sin(e) * forward + math.cos(e) * up
        rz = np.array([[math.cos(a), -math.sin(a), 0.0], [math.sin(a), math.cos(a), 0.0], [0.0, 0.0, 1.0]])
        return rz @ right, rz @ up, rz @ forward

    @classmethod
    def for_model_file(cls, model_path: str | Path) -> "Camera":
        """Read an optional ``<model>.view.json`` sidecar next to the model."""
        sidecar = Path(model_path).with_suffix(".view.json")
        if not sidecar.exists():
            return cls()
        data = json.loads(sidecar.read_text())
        return cls(azimuth=float(data.get("azimuth", 0.0)), elevation=float(data.get("elevation", 0.0)))


MULTI_VIEW_CAMERAS = (Camera(0.0, 0.0), Camera(90.0, 0.0), Camera(0.0, 90.0))


@dataclass(eq=False)
class RasterImage:
    pixels: np.ndarray
    label: str = ""
    _png: bytes | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3 or self.pixels.dtype != np.uint8:
            raise ValueError("pixels must be an (H, W, 3) uint8 array")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image must be non-empty")

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.pixels, other.pixels)

    def to_png(self) -> bytes:
        if self._png is None:
            buf = io.BytesIO()
            Image.fromarray(self.pixels, "RGB").save(buf, format="PNG", compress_level=6)
            self._png = buf.getvalue()
        return self._png

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_png())
        return path


# --- geometry ------------------------------------------------------------------


@dataclass(frozen=True)
class _PlacedGeom:
    geom: GeomPrimitive
    body_index: int
    center: np.ndarray
    rotation: np.ndarray


def _placed_geoms(model: RobotModel, pose) -> list[_PlacedGeom]:
    world = forward_kinematics(model, pose)
    out = []
    for bi, body in enumerate(model.bodies):
        for g in body.geoms:
            t = world[body.name] @ local_transform(g.position, g.orientation)
            out.append(_PlacedGeom(g, bi, t[:3, 3].copy(), t[:3, :3].copy()))
    return out


def _project(points: np.ndarray, camera: Camera) -> np.ndarray:
    right, up, _ = camera.basis()
    pts = np.atleast_2d(points)
    return np.column_stack([pts @ right, pts @ up])


def _geom_extent(pg: _PlacedGeom, camera: Camera) -> tuple[float, float, float, float]:
    g = pg.geom
    if g.kind == "sphere":
        c = _project(pg.center, camera)[0]
        r = g.size[0]
        return c[0] - r, c[1] - r, c[0] + r, c[1] + r
    if g.kind in ("capsule", "cylinder"):
        axis = pg.rotation[:, 2] * g.size[1]
        ends = _project(np.vstack([pg.center - axis, pg.center + axis]), camera)
        r = g.size[0]
        return ends[:, 0].min() - r, ends[:, 1].min() - r, ends[:, 0].max() + r, ends[:, 1].max() + r
    corners = _project(_box_corners(pg), camera)
    return corners[:, 0].min(), corners[:, 1].min(), corners[:, 0].max(), corners[:, 1].max()


def _box_corners(pg: _PlacedGeom) -> np.ndarray:
    hx, hy, hz = pg.geom.size
    signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
    return pg.center + (signs * [hx, hy, hz]) @ pg.rotation.T


def _union(boxes) -> tuple[float, float, float, float] | None:
    boxes = list(boxes)
    if not boxes:
        return None
    arr = np.array(boxes)
    return float(arr[:, 0].min()), float(arr[:, 1].min()), float(arr[:, 2].max()), float(arr[:, 3].max())


def _square(bounds, min_extent: float = MIN_EXTENT) -> tuple[float, float, float]:
    u0, v0, u1, v1 = bounds
    half = max(u1 - u0, v1 - v0, min_extent) / 2.0
    return (u0 + u1) / 2.0, (v0 + v1) / 2.0, half


@lru_cache(maxsize=64)
def full_frame(model: RobotModel, camera: Camera = Camera()) -> tuple[float, float, float]:
    """Fixed (center_u, center_v, half_extent) framing for full views.

    Covers the default pose and every single-joint excursion to either limit,
    so the camera does not move between poses of the same model.
    """
    poses = [model.default_array()]
    lo, hi = model.limits_array()
    for i in range(model.n_joints):
        for bound in (lo[i], hi[i]):
            p = model.default_array()
            p[i] = bound
            poses.append(p)
    boxes = [_geom_extent(pg, camera) for p in poses for pg in _placed_geoms(model, p)]
    bounds = _union(boxes)
    if bounds is None:
        return 0.0, 0.0, MIN_EXTENT
    cu, cv, half = _square(bounds)
    return cu, cv, half * (1.0 + FRAME_PADDING)


def zoom_bounds(model: RobotModel, pose, joint: str, camera: Camera = Camera()) -> tuple[float, float, float, float]:
    """View-plane box around the bodies moved by ``joint``, padded 20% per side."""
    if not model.has_joint(joint):
        raise UnknownJoint(joint)
    subtree = set(model.subtree(model.joint(joint).body))
    placed = [pg for pg in _placed_geoms(model, pose) if model.bodies[pg.body_index].name in subtree]
    bounds = _union(_geom_extent(pg, camera) for pg in placed)
    if bounds is None:
        world = forward_kinematics(model, pose)
        pts = _project(np.array([world[b][:3, 3] for b in sorted(subtree)]), camera)
        bounds = (pts[:, 0].min(), pts[:, 1].min(), pts[:, 0].max(), pts[:, 1].max())
    u0, v0, u1, v1 = bounds
    pu = max(u1 - u0, MIN_EXTENT) * ZOOM_PADDING
    pv = max(v1 - v0, MIN_EXTENT) * ZOOM_PADDING
    return u0 - pu, v0 - pv, u1 + pu, v1 + pv


# --- rasterization -------------------------------------------------------------


def _seg_dist2(px, py, a, b):
    d = b - a
    dd = float(d @ d)
    if dd < 1e-18:
        return (px - a[0]) ** 2 + (py - a[1]) ** 2, np.zeros_like(px)
    s = ((px - a[0]) * d[0] + (py - a[1]) * d[1]) / dd
    sc = np.clip(s, 0.0, 1.0)
    return (px - a[0] - sc * d[0]) ** 2 + (py - a[1] - sc * d[1]) ** 2, s


def _hull(points: np.ndarray) -> np.ndarray:
    pts = sorted(set(map(tuple, np.round(points, 12))))
    if len(pts) <= 2:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def _geom_mask(pg: _PlacedGeom, camera: Camera, px, py):
    g = pg.geom
    if g.kind == "sphere":
        c = _project(pg.center, camera)[0]
        return (px - c[0]) ** 2 + (py - c[1]) ** 2 <= g.size[0] ** 2
    if g.kind == "capsule":
        axis = pg.rotation[:, 2] * g.size[1]
        a, b = _project(np.vstack([pg.center - axis, pg.center + axis]), camera)
        d2, _ = _seg_dist2(px, py, a, b)
        return d2 <= g.size[0] ** 2
    if g.kind == "cylinder":
        r = g.size[0]
        unit_axis = pg.rotation[:, 2]
        axis = unit_axis * g.size[1]
        a, b = _project(np.vstack([pg.center - axis, pg.center + axis]), camera)
        d2, s = _seg_dist2(px, py, a, b)
        mask = (d2 <= r * r) & (s >= 0.0) & (s <= 1.0)
        # end caps project to ellipses: major r across the axis, minor r*|cos| along it
        _, _, forward = camera.basis()
        minor = r * abs(float(unit_axis @ forward))
        d = b - a
        n = float(np.hypot(*d))
        along = d / n if n > 1e-12 else np.array([1.0, 0.0])
        across = np.array([-along[1], along[0]])
        for c in (a, b):
            du = (px - c[0]) * along[0] + (py - c[1]) * along[1]
            dv = (px - c[0]) * across[0] + (py - c[1]) * across[1]
            if minor < 1e-12:
                continue
            mask |= (du / minor) ** 2 + (dv / r) ** 2 <= 1.0
        return mask
    hull = _hull(_project(_box_corners(pg), camera))
    if len(hull) < 3:
        return np.zeros_like(px, dtype=bool)
    mask = np.ones_like(px, dtype=bool)
    for i in range(len(hull)):
        p0, p1 = hull[i], hull[(i + 1) % len(hull)]
        mask &= (p1[0] - p0[0]) * (py - p0[1]) - (p1[1] - p0[1]) * (px - p0[0]) >= 0
    return mask


def _draw_label(pixels: np.ndarray, label: str) -> np.ndarray:
    if not label:
        return pixels
    img = Image.fromarray(pixels, "RGB")
    draw = ImageDraw.Draw(img)
    # bitmap font: identical glyphs regardless of FreeType availability
    loader = getattr(ImageFont, "load_default_imagefont", ImageFont.load_default)
    draw.text((4, 4), label, fill=(0, 0, 0), font=loader())
    return np.asarray(img, dtype=np.uint8).copy()


def rasterize(model: RobotModel, pose, frame, size: int, camera: Camera = Camera(), label: str = "") -> RasterImage:
    cu, cv, half = frame
    pixels = np.empty((size, size, 3), dtype=np.uint8)
    pixels[:] = BACKGROUND
    scale = 2.0 * half / size
    placed = _placed_geoms(model, pose)
    _, _, forward = camera.basis()
    order = sorted(range(len(placed)), key=lambda i: (-float(placed[i].center @ forward), i))
    for i in order:
        pg = placed[i]
        u0, v0, u1, v1 = _geom_extent(pg, camera)
        c0 = max(int(math.floor((u0 - (cu - half)) / scale)) - 1, 0)
        c1 = min(int(math.ceil((u1 - (cu - half)) / scale)) + 1, size)
        r0 = max(int(math.floor(((cv + half) - v1) / scale)) - 1, 0)
        r1 = min(int(math.ceil(((cv + half) - v0) / scale)) + 1, size)
        if c0 >= c1 or r0 >= r1:
            continue
        cols = cu - half + (np.arange(c0, c1) + 0.5) * scale
        rows = cv + half - (np.arange(r0, r1) + 0.5) * scale
        px, py = np.meshgrid(cols, rows)
        mask = _geom_mask(pg, camera, px, py)
        region = pixels[r0:r1, c0:c1]
        region[mask] = PALETTE[pg.body_index % len(PALETTE)]
    return RasterImage(_draw_label(pixels, label), label=label)


def render_pose(
    model: RobotModel,
    pose=None,
    view: str = "full",
    joint: str | None = None,
    *,
    size: int | None = None,
    camera: Camera = Camera(),
    label: str = "",
) -> RasterImage:
    """Render ``pose`` (default pose if None) as a full or zoomed view.

    ``view="zoom"`` frames the padded bounding box of the bodies distal to
    ``joint``; a zoom without a joint frames the whole robot tightly.
    """
    if pose is None:
        pose = model.default_array()
    if view == "full":
        return rasterize(model, pose, full_frame(model, camera), size or FULL_SIZE, camera, label)
    if view != "zoom":
        raise ValueError(f"view must be 'full' or 'zoom', got {view!r}")
    if joint is None:
        bounds = _union(_geom_extent(pg, camera) for pg in _placed_geoms(model, pose))
        frame = _square(bounds) if bounds else (0.0, 0.0, MIN_EXTENT)
    else:
        frame = _square(zoom_bounds(model, pose, joint, camera))
    return rasterize(model, pose, frame, size or ZOOM_SIZE, camera, label)
