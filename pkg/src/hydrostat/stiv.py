"""Space-time image velocimetry.

A search line laid along the flow is sampled in every frame; stacking the
samples gives a space-time image (rows = time, columns = distance along the
line).  Surface texture drifting along the line leaves straight streaks whose
angle from the time axis encodes the displacement per frame:
``tan(angle) = pixels per frame``.

Streaks are found with a line-segment detector in the LSD family: pixels are
grouped by region growing on the level-line orientation, each region is fitted
with a rectangle, and rectangles that are too short or too sparse are dropped.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from . import _kernels
from .errors import LineOutOfBounds
from .geometry import bilinear_sample

DEFAULT_WINDOW = (math.radians(2.0), math.radians(80.0))


@dataclass(frozen=True)
class FrameSequence:
    frames: np.ndarray  # (T, H, W)
    fps: float
    resolution: float  # metres per pixel

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=float)
        if f.ndim != 3 or f.shape[0] < 2:
            raise ValueError("need at least 2 frames of shape (H, W)")
        if not (self.fps > 0 and self.resolution > 0):
            raise ValueError("fps and resolution must be positive")
        object.__setattr__(self, "frames", f)

    @property
    def shape(self):
        return self.frames.shape


@dataclass(frozen=True)
class SearchLine:
    origin: tuple[float, float]  # (u, v) pixel
    direction: tuple[float, float]
    length: int = 64
    position: int = 0  # cross-section index measured by this line

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        n = float(np.hypot(*d))
        if n == 0:
            raise ValueError("direction must be nonzero")
        object.__setattr__(self, "direction", (float(d[0] / n), float(d[1] / n)))
        if self.length < 8:
            raise ValueError("search line must be at least 8 px long")

    def points(self):
        k = np.arange(self.length, dtype=float)
        return self.origin[0] + k * self.direction[0], self.origin[1] + k * self.direction[1]


@dataclass(frozen=True)
class LineSegment:
    p0: tuple[float, float]  # (time, space)
    p1: tuple[float, float]
    angle: float  # from the time axis, radians
    length: float
    density: float = 1.0
    n_pixels: int = 0


@dataclass(frozen=True)
class VelocitySample:
    position: int
    v: float
    weight: float


@dataclass(frozen=True)
class DetectorConfig:
    tolerance: float = math.radians(22.5)
    min_length_factor: float = 0.05
    min_density: float = 0.7
    # gradient quantization error, in grey levels, as in LSD
    quant: float = 2.0
    # light pre-smoothing; larger values let white noise form longer regions
    smooth_sigma: float = 0.6
    min_pixels: int = 4
    min_elongation: float = 3.0
    axis_agreement: float = math.radians(3.0)


@dataclass
class LineVelocities:
    samples: list = field(default_factory=list)
    skipped: list = field(default_factory=list)  # (position, reason)


def build_sti(seq: FrameSequence, line: SearchLine) -> np.ndarray:
    """Sample ``line`` in every frame: ``sti[t, k]`` at ``origin + k * direction``."""
    u, v = line.points()
    _, h, w = seq.shape
    if u.min() < 0 or v.min() < 0 or u.max() > w - 1 or v.max() > h - 1:
        raise LineOutOfBounds(f"search line at {line.origin} leaves the {w}x{h} frame")
    return np.stack([bilinear_sample(f, u, v) for f in seq.frames])


def _gradients(img):
    a = img[:-1, :-1]
    b = img[:-1, 1:]
    c = img[1:, :-1]
    d = img[1:, 1:]
    gx = 0.5 * (b + d - a - c)  # along columns (space)
    gy = 0.5 * (c + d - a - b)  # along rows (time)
    return gx, gy


def detect_segments(sti, config: DetectorConfig = DetectorConfig()) -> list[LineSegment]:
    """Detect straight texture streaks in a space-time image."""
    img = np.asarray(sti, dtype=float)
    n_t, n_s = img.shape
    if n_t < 8 or n_s < 8:
        raise ValueError("space-time image must be at least 8x8")
    if config.smooth_sigma > 0:
        img = gaussian_filter(img, config.smooth_sigma, mode="nearest")
    gx, gy = _gradients(img)
    mag = np.hypot(gx, gy)
    level_angle = np.arctan2(gx, -gy)
    threshold = config.quant / math.sin(config.tolerance)
    valid = (mag > threshold).astype(np.uint8)
    if not valid.any():
        return []
    flat = mag.ravel()
    order = np.argsort(-flat, kind="stable").astype(np.int64)
    order = order[flat[order] > threshold]
    labels, n_reg = _kernels.region_grow(level_angle, valid, order, config.tolerance)
    if n_reg == 0:
        return []
    # level-line direction expressed as an angle from the time axis
    level_dir = np.arctan2(-gy, gx)
    return _fit_rectangles(labels, n_reg, mag, level_dir, img.shape, config)


def _fit_rectangles(labels, n_reg, mag, level_dir, shape, config):
    lab = labels.ravel()
    sel = lab >= 0
    lab = lab[sel]
    rows, cols = np.divmod(np.flatnonzero(sel), labels.shape[1])
    # gradients live on the 2x2 block centres
    t = rows + 0.5
    s = cols + 0.5
    wgt = mag.ravel()[sel]

    count = np.bincount(lab, minlength=n_reg)
    wsum = np.bincount(lab, wgt, n_reg)
    ct = np.bincount(lab, wgt * t, n_reg) / wsum
    cs = np.bincount(lab, wgt * s, n_reg) / wsum
    dt = t - ct[lab]
    ds = s - cs[lab]
    # Elongated regions take the inertia axis, which is the most accurate
    # estimate of a long streak.  Compact regions (e.g. streaks clipped by a
    # corner) take the weighted mean level-line orientation instead, averaged
    # over doubled angles so polarity cancels.
    stt = np.bincount(lab, wgt * dt * dt, n_reg)
    sss = np.bincount(lab, wgt * ds * ds, n_reg)
    sts = np.bincount(lab, wgt * dt * ds, n_reg)
    inertia_axis = 0.5 * np.arctan2(2.0 * sts, stt - sss)
    half_tr = 0.5 * (stt + sss)
    disc = np.sqrt(0.25 * (stt - sss) ** 2 + sts * sts)
    with np.errstate(divide="ignore", invalid="ignore"):
        elong = np.sqrt((half_tr + disc) / np.maximum(half_tr - disc, 1e-12 * (half_tr + disc) + 1e-300))
    theta_px = level_dir.ravel()[sel]
    c2 = np.bincount(lab, wgt * np.cos(2.0 * theta_px), n_reg)
    s2 = np.bincount(lab, wgt * np.sin(2.0 * theta_px), n_reg)
    level_axis = 0.5 * np.arctan2(s2, c2)
    disagree = np.abs(np.angle(np.exp(2j * (inertia_axis - level_axis)))) / 2.0
    elongated = elong >= config.min_elongation
    theta = np.where(elongated, inertia_axis, level_axis)
    # a long region whose shape contradicts its own gradients is not a clean streak
    consistent = ~elongated | (disagree <= config.axis_agreement)
    et, es = np.cos(theta), np.sin(theta)

    along = dt * et[lab] + ds * es[lab]
    across = -dt * es[lab] + ds * et[lab]
    lmin = np.full(n_reg, np.inf)
    lmax = np.full(n_reg, -np.inf)
    wmin = np.full(n_reg, np.inf)
    wmax = np.full(n_reg, -np.inf)
    np.minimum.at(lmin, lab, along)
    np.maximum.at(lmax, lab, along)
    np.minimum.at(wmin, lab, across)
    np.maximum.at(wmax, lab, across)

    length = lmax - lmin
    width = np.maximum(wmax - wmin, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        density = count / (np.maximum(length, 1e-12) * width)
    min_len = config.min_length_factor * math.sqrt(shape[0] * shape[1])

    keep = consistent & (count >= config.min_pixels) & (length >= min_len) & (density >= config.min_density)
    out = []
    for r in np.flatnonzero(keep):
        mid = 0.5 * (wmin[r] + wmax[r])
        c_t = ct[r] - mid * es[r]
        c_s = cs[r] + mid * et[r]
        p0 = (c_t + lmin[r] * et[r], c_s + lmin[r] * es[r])
        p1 = (c_t + lmax[r] * et[r], c_s + lmax[r] * es[r])
        if p1[0] < p0[0]:
            p0, p1 = p1, p0
        d_t, d_s = p1[0] - p0[0], p1[1] - p0[1]
        if d_t <= 1e-12:
            continue  # instantaneous streak, angle undefined
        out.append(
            LineSegment(
                p0=(float(p0[0]), float(p0[1])),
                p1=(float(p1[0]), float(p1[1])),
                angle=math.atan2(d_s, d_t),
                length=float(math.hypot(d_t, d_s)),
                density=float(density[r]),
                n_pixels=int(count[r]),
            )
        )
    return out


def filter_by_angle(segments, min_angle: float, max_angle: float, bidirectional: bool = False) -> list[LineSegment]:
    """Keep segments whose angle lies in ``[min_angle, max_angle]``.

    With ``bidirectional`` the test applies to ``|angle|``, so flow in either
    direction along the line survives.
    """
    if not min_angle < max_angle:
        raise ValueError("min_angle must be below max_angle")
    if bidirectional:
        return [s for s in segments if min_angle <= abs(s.angle) <= max_angle]
    return [s for s in segments if min_angle <= s.angle <= max_angle]


def segment_to_velocity(seg: LineSegment, resolution: float, fps: float) -> float:
    """Displacement per frame times frame rate times pixel size."""
    return math.tan(seg.angle) * resolution * fps


def _one_line(seq, line, window, config, bidirectional):
    sti = build_sti(seq, line)
    segs = filter_by_angle(detect_segments(sti, config), window[0], window[1], bidirectional)
    return [VelocitySample(line.position, segment_to_velocity(s, seq.resolution, seq.fps), s.length) for s in segs]


def line_velocities(
    seq: FrameSequence,
    lines,
    window: tuple[float, float] = DEFAULT_WINDOW,
    config: DetectorConfig = DetectorConfig(),
    workers: int = 1,
    bidirectional: bool = False,
) -> LineVelocities:
    """Velocity samples from every search line; out-of-frame lines are skipped.

    Positive velocities follow the line direction.  ``window`` bounds the
    signed streak angle unless ``bidirectional`` is set.
    """
    lines = list(lines)
    result = LineVelocities()

    def run(line):
        try:
            return _one_line(seq, line, window, config, bidirectional), None
        except LineOutOfBounds as exc:
            return [], str(exc)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            outs = list(ex.map(run, lines))
    else:
        outs = [run(ln) for ln in lines]
    for line, (samples, err) in zip(lines, outs):
        if err is not None:
            result.skipped.append((line.position, err))
        result.samples.extend(samples)
    return result


def cross_section_lines(start, end, flow_direction, length: int = 64, centered: bool = True):
    """One search line per pixel step along the cross-section ``start -> end``."""
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    n = int(math.floor(np.hypot(*(end - start)))) + 1
    d = np.asarray(flow_direction, dtype=float)
    d = d / np.hypot(*d)
    lines = []
    for k in range(n):
        p = start + (end - start) * (k / max(n - 1, 1))
        o = p - d * (length - 1) / 2.0 if centered else p
        lines.append(SearchLine((float(o[0]), float(o[1])), (float(d[0]), float(d[1])), length, k))
    return lines
