"""Seeded synthetic scenes with known ground truth.

Every generator draws from its own counter-based stream keyed by
``(seed, stream id)``, so outputs do not depend on call order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import AdvectionOutOfFrame, SpecOutOfRange
from .stiv import FrameSequence

STREAM_MASK = 1
STREAM_FRAMES = 2
STREAM_HISTORY = 3
STREAM_RATING = 4


def rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


# ---------------------------------------------------------------------------
# masks


@dataclass(frozen=True)
class MaskSpec:
    """Water below a straight shoreline.

    ``slope`` is expressed like the quality prior: the water column height
    changes by ``slope`` pixels per column, so the boundary row is
    ``r0 - slope * (x - W/2)`` with 1-based column ``x``.
    """

    H: int
    W: int
    r0: float
    slope: float = 0.0
    flip_prob: float = 0.0
    corrupted: tuple[int, ...] = ()
    seed: int = 0


def gen_mask(spec: MaskSpec):
    """Return ``(mask, truth)``; truth holds the clean boundary row per column."""
    if spec.H < 1 or spec.W < 1 or not 0 <= spec.r0 < spec.H or not 0 <= spec.flip_prob < 0.5:
        raise SpecOutOfRange(f"invalid mask spec {spec}")
    x = np.arange(1, spec.W + 1, dtype=float)
    exact = spec.r0 - spec.slope * (x - spec.W / 2.0)
    rows = np.clip(np.floor(exact + 0.5), 0, spec.H).astype(int)
    mask = np.arange(spec.H)[:, None] >= rows[None, :]
    if spec.flip_prob > 0:
        flips = rng(spec.seed, STREAM_MASK).random(mask.shape) < spec.flip_prob
        mask = mask ^ flips
    for col in spec.corrupted:
        mask[:, col] = True
    truth = {"r0": float(spec.r0), "boundary_rows": rows.tolist(), "slope": float(spec.slope)}
    return mask.astype(np.uint8), truth


# ---------------------------------------------------------------------------
# frame sequences


@dataclass(frozen=True)
class SceneSpec:
    """Texture advected along +u (columns), one speed per row.

    ``velocity`` is a scalar or a length-H sequence in m/s.
    """

    T: int = 100
    H: int = 16
    W: int = 96
    fps: float = 25.0
    resolution: float = 0.02
    velocity: object = 0.5
    contrast: float = 30.0
    noise: float = 0.0
    base: float = 128.0
    texture_width: int = 4
    seed: int = 0

    def profile(self) -> np.ndarray:
        v = np.broadcast_to(np.asarray(self.velocity, dtype=float), (self.H,))
        return np.array(v)


def gen_frames(spec: SceneSpec):
    """Return ``(FrameSequence, truth)`` for an advecting random texture."""
    if spec.T < 2 or not spec.contrast > 0 or spec.H < 1 or spec.W < 2:
        raise SpecOutOfRange(f"invalid scene spec {spec}")
    v = spec.profile()
    px_per_frame = v / (spec.fps * spec.resolution)
    max_shift = float(np.max(np.abs(px_per_frame))) * (spec.T - 1)
    if max_shift > spec.W:
        raise AdvectionOutOfFrame(f"texture drifts {max_shift:.1f} px in a {spec.W} px frame")
    margin = int(math.ceil(max_shift)) + 2
    g = rng(spec.seed, STREAM_FRAMES)
    tex = g.standard_normal((spec.H + 2 * spec.texture_width, spec.W + 2 * margin + 2 * spec.texture_width))
    tex = uniform_filter(tex, spec.texture_width, mode="wrap")
    tex = tex[spec.texture_width:-spec.texture_width, spec.texture_width:-spec.texture_width]
    tex = (tex - tex.mean()) / tex.std()
    tex = spec.base + spec.contrast * tex

    cols = np.arange(spec.W, dtype=float)
    frames = np.empty((spec.T, spec.H, spec.W))
    row_idx = np.arange(spec.H)[:, None]
    for t in range(spec.T):
        x = cols[None, :] + margin - px_per_frame[:, None] * t
        x0 = np.floor(x).astype(int)
        f = x - x0
        frames[t] = tex[row_idx, x0] * (1 - f) + tex[row_idx, x0 + 1] * f
    if spec.noise > 0:
        frames += spec.noise * g.standard_normal(frames.shape)
    truth = {"velocity": v.tolist(), "px_per_frame": px_per_frame.tolist()}
    return FrameSequence(frames, spec.fps, spec.resolution), truth


# ---------------------------------------------------------------------------
# flow histories


@dataclass(frozen=True)
class HistorySpec:
    """Rows ``v_k = (gain_k * b + offset_k) * (1 + jitter * z)`` with ``b ~ U(base)``."""

    T: int
    gains: tuple[float, ...]
    offsets: tuple[float, ...] | None = None
    base: tuple[float, float] = (0.5, 1.5)
    jitter: float = 0.0
    missing: float = 0.0
    seed: int = 0
    names: tuple[str, ...] | None = field(default=None)

    @property
    def N(self):
        return len(self.gains)


def gen_history(spec: HistorySpec):
    """Return ``(matrix, truth)``; missing entries are 0 in the matrix only."""
    if spec.T < 1 or spec.N < 2 or any(g <= 0 for g in spec.gains):
        raise SpecOutOfRange("history needs T >= 1, N >= 2 and positive gains")
    g = rng(spec.seed, STREAM_HISTORY)
    b = g.uniform(spec.base[0], spec.base[1], size=spec.T)
    gains = np.asarray(spec.gains, dtype=float)
    offsets = np.zeros_like(gains) if spec.offsets is None else np.asarray(spec.offsets, dtype=float)
    clean = b[:, None] * gains[None, :] + offsets[None, :]
    z = g.standard_normal(clean.shape)
    truth = np.maximum(clean * (1.0 + spec.jitter * z), 1e-3)
    drop = g.random(truth.shape) < spec.missing
    hist = np.where(drop, 0.0, truth)
    return hist, {"truth": truth, "base": b, "missing": drop}


def five_node_history(T: int = 500, jitter: float = 0.02, seed: int = 0):
    """Five cross-section nodes with the outer pairs and inner pairs symmetric.

    At base draw 1 the profile is (0.5, 0.8, 1.0, 0.8, 0.5); the centre node is
    1.25 times its inner neighbours.
    """
    spec = HistorySpec(
        T=T,
        gains=(0.5, 0.8, 1.0, 0.8, 0.5),
        base=(0.5, 1.5),
        jitter=jitter,
        seed=seed,
        names=("d20", "d40", "d60", "d80", "d100"),
    )
    return gen_history(spec)


# ---------------------------------------------------------------------------
# rating data


def gen_rating(
    a: float,
    b: float,
    c: float,
    n: int = 50,
    h_range: tuple[float, float] = (0.5, 3.0),
    noise: float = 0.0,
    outlier_frac: float = 0.0,
    outlier_mag: float = 0.8,
    seed: int = 0,
):
    """Stage-discharge pairs from ``Q = aH^2 + bH + c``.

    Returns ``(h, q, is_outlier)``; ``noise`` is relative (1 sigma) and
    outliers are scaled by ``1 + outlier_mag``.
    """
    g = rng(seed, STREAM_RATING)
    h = np.sort(g.uniform(h_range[0], h_range[1], size=n))
    q_true = a * h * h + b * h + c
    q = q_true * (1.0 + noise * g.standard_normal(n))
    is_out = np.zeros(n, dtype=bool)
    k = int(round(outlier_frac * n))
    if k:
        idx = g.choice(n, size=k, replace=False)
        is_out[idx] = True
        q[idx] = q_true[idx] * (1.0 + outlier_mag)
    return h, q, is_out
