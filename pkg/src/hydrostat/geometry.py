"""Image-to-metric mapping.

Two paths are provided:

* staff-gauge path: a planar homography estimated from >= 4 point pairs
  with the normalized direct linear transform;
* top-down path: a pinhole camera model whose rays are intersected with the
  horizontal water plane, after an on-site correction of the pitch angle.

Conventions
-----------
World frame: x to the right of the camera heading, y forward (horizontal),
z up.  The optical centre sits at ``(0, 0, height)``.

Camera frame: x right, y down, z along the optical axis (pixel ``u`` grows
with x, ``v`` grows with y).

Orientation is built as yaw about the world vertical, then pitch about the
camera-right axis (positive tilts the optical axis downward), then roll about
the optical axis.  With all three angles zero the camera looks horizontally
along +y.  Lens distortion is not modelled.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DegenerateConfiguration,
    PointAtInfinity,
    RayAboveHorizon,
    RegionOutsideView,
    TooFewPoints,
    VerificationFailed,
    ZeroBaseline,
)

_EPS_W = 1e-12
_EPS_DET = 1e-12
# rays shallower than this (radians below horizontal) are treated as horizon
_MIN_DEPRESSION = 1e-6


class PixelPoint(NamedTuple):
    u: float
    v: float


class GroundPoint(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class Homography:
    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise DegenerateConfiguration("homography must be a finite 3x3 matrix")
        if abs(np.linalg.det(m)) <= _EPS_DET:
            raise DegenerateConfiguration("homography is singular")
        object.__setattr__(self, "m", _normalize_h(m))

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.m))


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    pitch: float
    height: float
    yaw: float = 0.0
    roll: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not self.height > 0:
            raise ValueError("camera height must be positive")
        if not 0.0 < self.pitch <= math.pi / 2:
            raise ValueError("pitch must lie in (0, pi/2] for a downward-looking camera")

    @property
    def rotation(self) -> np.ndarray:
        """Camera-to-world rotation matrix."""
        return rotation_matrix(self.pitch, self.yaw, self.roll)

    @property
    def center(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.height])


@dataclass(frozen=True)
class RectifiedGrid:
    """Top-down raster with a constant metric resolution.

    Row 0 is the far edge of the region (largest y); column 0 the smallest x.
    ``source_u``/``source_v`` hold the image pixel each cell centre projects
    to, NaN where that pixel falls outside the image.
    """

    origin: GroundPoint
    resolution: float
    width: int
    height: int
    source_u: np.ndarray
    source_v: np.ndarray

    def cell_center(self, row: int, col: int) -> GroundPoint:
        return GroundPoint(
            self.origin.x + (col + 0.5) * self.resolution,
            self.origin.y - (row + 0.5) * self.resolution,
            self.origin.z,
        )

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.source_u) & np.isfinite(self.source_v)


# ---------------------------------------------------------------------------
# homography path


def _normalize_h(m):
    if abs(m[2, 2]) > _EPS_W:
        return m / m[2, 2]
    return m / np.linalg.norm(m)


def _similarity_normalizer(pts):
    """Shift to the centroid and scale so the mean distance is sqrt(2)."""
    centroid = pts.mean(axis=0)
    mean_dist = np.mean(np.linalg.norm(pts - centroid, axis=1))
    if mean_dist <= 0:
        raise DegenerateConfiguration("all points coincide")
    s = math.sqrt(2.0) / mean_dist
    return np.array([[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]])


def _collinear(a, b, c, tol):
    area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    scale = max(np.linalg.norm(b - a) * np.linalg.norm(c - a), 1e-300)
    return abs(area2) <= tol * scale


def estimate_homography(correspondences: Sequence) -> Homography:
    """Estimate the homography mapping source points onto destination points.

    Parameters
    ----------
    correspondences : sequence of (src, dst) pairs
        Each element is a pair of 2-vectors (``PixelPoint`` or tuples).

    Returns
    -------
    Homography
        ``dst ~ H @ [src, 1]``.
    """
    pairs = list(correspondences)
    if len(pairs) < 4:
        raise TooFewPoints(f"need at least 4 correspondences, got {len(pairs)}")
    src = np.array([[float(p[0][0]), float(p[0][1])] for p in pairs])
    dst = np.array([[float(p[1][0]), float(p[1][1])] for p in pairs])
    if not (np.all(np.isfinite(src)) and np.all(np.isfinite(dst))):
        raise DegenerateConfiguration("non-finite coordinates")

    t_src = _similarity_normalizer(src)
    t_dst = _similarity_normalizer(dst)
    ns = (t_src @ np.column_stack([src, np.ones(len(src))]).T).T[:, :2]
    nd = (t_dst @ np.column_stack([dst, np.ones(len(dst))]).T).T[:, :2]

    if len(pairs) == 4:
        for a, b, c in itertools.combinations(range(4), 3):
            if _collinear(ns[a], ns[b], ns[c], 1e-10):
                raise DegenerateConfiguration("three collinear source points")

    n = len(pairs)
    a = np.zeros((2 * n, 9))
    x, y = ns[:, 0], ns[:, 1]
    xp, yp = nd[:, 0], nd[:, 1]
    a[0::2, 0:3] = np.column_stack([-x, -y, -np.ones(n)])
    a[0::2, 6:9] = np.column_stack([xp * x, xp * y, xp])
    a[1::2, 3:6] = np.column_stack([-x, -y, -np.ones(n)])
    a[1::2, 6:9] = np.column_stack([yp * x, yp * y, yp])

    _, sv, vt = np.linalg.svd(a)
    # a one-dimensional null space is required for a unique solution
    if len(sv) >= 9 and sv[7] <= 1e-10 * sv[0]:
        raise DegenerateConfiguration("rank-deficient DLT system")
    hn = vt[-1].reshape(3, 3)
    m = np.linalg.inv(t_dst) @ hn @ t_src
    if abs(np.linalg.det(m / np.linalg.norm(m))) <= _EPS_DET:
        raise DegenerateConfiguration("estimated homography is singular")
    return Homography(m)


def apply_homography(h: Homography, p) -> PixelPoint:
    m = h.m
    u, v = float(p[0]), float(p[1])
    w = m[2, 0] * u + m[2, 1] * v + m[2, 2]
    if abs(w) < _EPS_W:
        raise PointAtInfinity(f"point {p} maps to infinity")
    return PixelPoint(
        (m[0, 0] * u + m[0, 1] * v + m[0, 2]) / w,
        (m[1, 0] * u + m[1, 1] * v + m[1, 2]) / w,
    )


def apply_homography_many(h: Homography, pts) -> np.ndarray:
    """Vectorized :func:`apply_homography` over an ``(n, 2)`` array."""
    pts = np.asarray(pts, dtype=float)
    hom = np.column_stack([pts, np.ones(len(pts))]) @ h.m.T
    if np.any(np.abs(hom[:, 2]) < _EPS_W):
        raise PointAtInfinity("at least one point maps to infinity")
    return hom[:, :2] / hom[:, 2:3]


# ---------------------------------------------------------------------------
# camera path


def _rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# level camera looking along +y: cam x -> world x, cam y -> world -z, cam z -> world y
_LEVEL = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])


def rotation_matrix(pitch: float, yaw: float = 0.0, roll: float = 0.0) -> np.ndarray:
    """Camera-to-world rotation for the yaw -> pitch -> roll sequence."""
    # Rx(-pitch) tips the optical axis toward camera +y, i.e. downward
    return _rot_z(-yaw) @ _LEVEL @ _rot_x(-pitch) @ _rot_z(roll)


def pitch_from_reference(camera: GroundPoint, reference: GroundPoint) -> float:
    """Depression angle of the sight line from ``camera`` to ``reference``."""
    horizontal = math.hypot(reference.x - camera.x, reference.y - camera.y)
    if horizontal < 1e-9:
        raise ZeroBaseline("camera and reference point share the same horizontal position")
    return math.atan2(camera.z - reference.z, horizontal)


def ray_depression(cam: CameraModel, p) -> float:
    """Angle below horizontal of the ray through pixel ``p``."""
    d = cam.rotation @ _pixel_ray(cam, p)
    return math.atan2(-d[2], math.hypot(d[0], d[1]))


def correct_pitch(
    reported: float,
    measured: float,
    verify=None,
    *,
    cam: CameraModel | None = None,
    verify_pixel=None,
    tolerance: float = math.radians(0.5),
) -> tuple[float, float]:
    """Replace the camera-reported pitch with the surveyed one.

    ``verify`` is an optional ``(camera, reference)`` pair of surveyed
    ``GroundPoint`` s for an independent check point.  By default the check
    point is assumed to lie on the optical axis; pass ``cam`` and
    ``verify_pixel`` when it is observed elsewhere in the image.

    Returns ``(corrected, residual)`` in radians.
    """
    for name, ang in (("reported", reported), ("measured", measured)):
        if not -math.pi / 2 < ang < math.pi / 2:
            raise ValueError(f"{name} pitch must lie in (-pi/2, pi/2)")
    corrected = float(measured)
    if verify is None:
        return corrected, 0.0

    observed = pitch_from_reference(verify[0], verify[1])
    if verify_pixel is None:
        predicted = corrected
    else:
        if cam is None:
            raise ValueError("verify_pixel requires a camera model")
        fixed = CameraModel(cam.fx, cam.fy, cam.cx, cam.cy, corrected, cam.height, cam.yaw, cam.roll)
        predicted = ray_depression(fixed, verify_pixel)
    residual = abs(predicted - observed)
    if residual > tolerance:
        raise VerificationFailed(
            f"verification residual {math.degrees(residual):.3f} deg exceeds "
            f"{math.degrees(tolerance):.3f} deg"
        )
    return corrected, residual


def _pixel_ray(cam, p):
    return np.array([(float(p[0]) - cam.cx) / cam.fx, (float(p[1]) - cam.cy) / cam.fy, 1.0])


def pixel_to_ground(cam: CameraModel, p, water_level: float = 0.0) -> GroundPoint:
    """Intersect the back-projected ray of pixel ``p`` with ``z = water_level``."""
    d = cam.rotation @ _pixel_ray(cam, p)
    dz = cam.height - water_level
    if dz <= 0:
        raise RayAboveHorizon("water plane is not below the camera")
    # d[2] must point down; the ray length t solves height + t*d_z = level
    if d[2] >= -_MIN_DEPRESSION * np.linalg.norm(d):
        raise RayAboveHorizon(f"pixel {tuple(p)} looks at or above the horizon")
    t = -dz / d[2]
    return GroundPoint(t * d[0], t * d[1], float(water_level))


def ground_to_pixel(cam: CameraModel, g) -> PixelPoint:
    """Forward pinhole projection of a world point."""
    xc = cam.rotation.T @ (np.asarray(g, dtype=float) - cam.center)
    if xc[2] <= 0:
        raise RegionOutsideView(f"point {tuple(g)} is behind the camera")
    return PixelPoint(cam.fx * xc[0] / xc[2] + cam.cx, cam.fy * xc[1] / xc[2] + cam.cy)


def ground_to_pixel_many(cam: CameraModel, pts) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    xc = (pts - cam.center) @ cam.rotation
    if np.any(xc[:, 2] <= 0):
        raise RegionOutsideView("region extends behind the camera")
    return np.column_stack(
        [cam.fx * xc[:, 0] / xc[:, 2] + cam.cx, cam.fy * xc[:, 1] / xc[:, 2] + cam.cy]
    )


def build_rectified_grid(
    cam: CameraModel,
    region: tuple[float, float, float, float],
    resolution: float,
    water_level: float = 0.0,
    image_size: tuple[int, int] | None = None,
) -> RectifiedGrid:
    """Lay a metric grid over ``region = (x_min, y_min, x_max, y_max)``.

    ``image_size`` is ``(width, height)`` of the source image; cells whose
    source pixel falls outside it are marked invalid (NaN).
    """
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    x0, y0, x1, y1 = map(float, region)
    if not (x1 > x0 and y1 > y0):
        raise ValueError("region must have positive extent")
    width = int(round((x1 - x0) / resolution))
    height = int(round((y1 - y0) / resolution))
    if width < 1 or height < 1:
        raise ValueError("region smaller than one cell")

    corners = np.array([[x0, y0], [x1, y0], [x0, y1], [x1, y1]])
    dz = cam.height - water_level
    if dz <= 0:
        raise RegionOutsideView("water plane is not below the camera")
    for cx_, cy_ in corners:
        g = np.array([cx_, cy_, water_level]) - cam.center
        if math.atan2(-g[2], math.hypot(g[0], g[1])) < _MIN_DEPRESSION:
            raise RegionOutsideView("region reaches the horizon")
        if (cam.rotation.T @ g)[2] <= 0:
            raise RegionOutsideView("region extends behind the camera")

    cols = x0 + (np.arange(width) + 0.5) * resolution
    rows = y1 - (np.arange(height) + 0.5) * resolution
    gx, gy = np.meshgrid(cols, rows)
    pts = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, float(water_level))])
    uv = ground_to_pixel_many(cam, pts)
    su = uv[:, 0].reshape(height, width)
    sv = uv[:, 1].reshape(height, width)
    if image_size is not None:
        w_img, h_img = image_size
        outside = (su < 0) | (su > w_img - 1) | (sv < 0) | (sv > h_img - 1)
        su = np.where(outside, np.nan, su)
        sv = np.where(outside, np.nan, sv)
    return RectifiedGrid(GroundPoint(x0, y1, float(water_level)), float(resolution), width, height, su, sv)


def bilinear_sample(image: np.ndarray, u, v) -> np.ndarray:
    """Bilinear interpolation at real coordinates; NaN outside the image."""
    image = np.asarray(image, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    h, w = image.shape
    ok = np.isfinite(u) & np.isfinite(v) & (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)
    uu = np.where(ok, u, 0.0)
    vv = np.where(ok, v, 0.0)
    u0 = np.minimum(np.floor(uu).astype(int), max(w - 2, 0))
    v0 = np.minimum(np.floor(vv).astype(int), max(h - 2, 0))
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    fu = uu - u0
    fv = vv - v0
    out = (
        image[v0, u0] * (1 - fu) * (1 - fv)
        + image[v0, u1] * fu * (1 - fv)
        + image[v1, u0] * (1 - fu) * fv
        + image[v1, u1] * fu * fv
    )
    return np.where(ok, out, np.nan)


def rectify_image(image: np.ndarray, grid: RectifiedGrid) -> np.ndarray:
    """Resample ``image`` onto ``grid``; invalid cells are NaN."""
    return bilinear_sample(image, grid.source_u, grid.source_v)
