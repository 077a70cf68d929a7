"""Gaussian kernel density estimates in one and two dimensions.

The 1-D estimate picks a representative velocity (the density mode) with a
confidence score; the 2-D product-kernel estimate supplies the pairwise
potentials used for imputation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DensityUnderflow, EmptyInterval, TooFewSamples

BANDWIDTH_FACTOR = 0.2
DENSITY_FLOOR = 1e-300
GRID_POINTS = 512
DEFAULT_CONFIDENCE = 0.3

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def auto_bandwidth(samples) -> float:
    """``0.2 * std(samples, ddof=1)`` with a small floor for degenerate sets."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise TooFewSamples("bandwidth needs at least 2 samples")
    floor = 1e-6 * (1.0 + abs(float(np.mean(x))))
    return max(BANDWIDTH_FACTOR * float(np.std(x, ddof=1)), floor)


@dataclass(frozen=True)
class ModeEstimate:
    mode: float
    confidence: float


class Kde1:
    def __init__(self, samples, weights=None, bandwidth: float | None = None):
        self.samples = np.asarray(samples, dtype=float).ravel()
        if self.samples.size == 0:
            raise TooFewSamples("empty sample set")
        if weights is None:
            self.weights = np.ones_like(self.samples)
        else:
            self.weights = np.asarray(weights, dtype=float).ravel()
            if self.weights.shape != self.samples.shape or np.any(self.weights < 0):
                raise ValueError("weights must be nonnegative and match samples")
            if self.weights.sum() <= 0:
                raise ValueError("total weight must be positive")
        self.h = auto_bandwidth(self.samples) if bandwidth is None else float(bandwidth)
        if not self.h > 0:
            raise ValueError("bandwidth must be positive")

    def __call__(self, x):
        return pdf1(self, x)


def pdf1(k: Kde1, x):
    x = np.asarray(x, dtype=float)
    z = (x[..., None] - k.samples) / k.h
    dens = np.exp(-0.5 * z * z) @ k.weights
    return dens * _INV_SQRT_2PI / (k.h * k.weights.sum())


def _golden_max(f, a, b, tol):
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def default_interval(k: Kde1) -> tuple[float, float]:
    return float(k.samples.min() - 3 * k.h), float(k.samples.max() + 3 * k.h)


def mode1(k: Kde1, interval: tuple[float, float] | None = None) -> ModeEstimate:
    """Most probable value of the density inside ``interval``.

    A 512-point grid locates the peak, golden-section search refines it to
    1e-6 of the interval width.  The confidence is the share of sample weight
    within one bandwidth of the mode.
    """
    lo, hi = default_interval(k) if interval is None else map(float, interval)
    if not hi > lo or not np.any((k.samples >= lo) & (k.samples <= hi)):
        raise EmptyInterval(f"no samples inside [{lo}, {hi}]")
    grid = np.linspace(lo, hi, GRID_POINTS)
    dens = pdf1(k, grid)
    i = int(np.argmax(dens))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, GRID_POINTS - 1)]
    mode = _golden_max(lambda t: float(pdf1(k, t)), a, b, 1e-6 * (hi - lo))
    if pdf1(k, mode) < dens[i]:
        mode = float(grid[i])
    near = np.abs(k.samples - mode) <= k.h
    conf = float(k.weights[near].sum() / k.weights.sum())
    return ModeEstimate(float(mode), min(max(conf, 0.0), 1.0))


class Kde2:
    """Product Gaussian kernel over ``(v_i, v_j)`` pairs, one bandwidth per axis."""

    def __init__(self, samples, bandwidths: tuple[float, float] | None = None):
        s = np.asarray(samples, dtype=float)
        if s.ndim != 2 or s.shape[1] != 2:
            raise ValueError("samples must have shape (n, 2)")
        if len(s) < 1:
            raise TooFewSamples("empty sample set")
        self.samples = s
        if bandwidths is None:
            bandwidths = (auto_bandwidth(s[:, 0]), auto_bandwidth(s[:, 1]))
        self.h = (float(bandwidths[0]), float(bandwidths[1]))
        if not (self.h[0] > 0 and self.h[1] > 0):
            raise ValueError("bandwidths must be positive")

    def __len__(self):
        return len(self.samples)

    def __call__(self, vi, vj):
        return pdf2(self, vi, vj)


def _exponents(k, vi, vj):
    zi = (np.asarray(vi, dtype=float)[..., None] - k.samples[:, 0]) / k.h[0]
    zj = (np.asarray(vj, dtype=float)[..., None] - k.samples[:, 1]) / k.h[1]
    return zi, zj, -0.5 * (zi * zi + zj * zj)


def pdf2(k: Kde2, vi, vj):
    _, _, e = _exponents(k, vi, vj)
    return np.exp(e).sum(axis=-1) / (2.0 * math.pi * len(k) * k.h[0] * k.h[1])


def log_pdf2(k: Kde2, vi, vj):
    """log of the density, floored at ``log(1e-300)``; safe in the far tails."""
    _, _, e = _exponents(k, vi, vj)
    m = e.max(axis=-1)
    lse = m + np.log(np.exp(e - m[..., None]).sum(axis=-1))
    out = lse - math.log(2.0 * math.pi * len(k) * k.h[0] * k.h[1])
    return np.maximum(out, math.log(DENSITY_FLOOR))


def grad_log_pdf2(k: Kde2, vi: float, vj: float) -> tuple[float, float]:
    """Analytic gradient of ``log pdf2`` at a single query point."""
    if float(pdf2(k, vi, vj)) < DENSITY_FLOOR:
        raise DensityUnderflow(f"density below {DENSITY_FLOOR} at ({vi}, {vj})")
    return _grad_log_pdf2_unchecked(k, vi, vj)


def _grad_log_pdf2_unchecked(k, vi, vj):
    zi, zj, e = _exponents(k, vi, vj)
    w = np.exp(e - e.max())
    w /= w.sum()
    return float(-(w @ zi) / k.h[0]), float(-(w @ zj) / k.h[1])
