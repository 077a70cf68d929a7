"""Stage-discharge rating curve: robust quadratic fit and control-point calibration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DuplicateControls, NonPositiveBase, RankDeficient, TooFewInliers

REL_THRESHOLD = 0.20
MAX_ITER = 20
Q_FLOOR = 1e-6
SIGMA_MIN = 0.05  # m
RIDGE = 1e-8


@dataclass(frozen=True)
class QuadraticCurve:
    a: float
    b: float
    c: float

    def __call__(self, h):
        h = np.asarray(h, dtype=float)
        return (self.a * h + self.b) * h + self.c

    def derivative(self, h):
        return 2.0 * self.a * np.asarray(h, dtype=float) + self.b

    def min_slope(self, lo: float, hi: float) -> float:
        """Smallest derivative on ``[lo, hi]`` (the derivative is linear)."""
        return float(min(self.derivative(lo), self.derivative(hi)))

    def to_dict(self):
        return {"a": self.a, "b": self.b, "c": self.c}


@dataclass
class FitReport:
    curve: QuadraticCurve
    inliers: list
    outliers: list
    iterations: int
    used_linear_prefit: bool
    converged: bool = True

    def to_dict(self):
        return {
            "curve": self.curve.to_dict(),
            "inliers": list(self.inliers),
            "outliers": list(self.outliers),
            "iterations": self.iterations,
            "used_linear_prefit": self.used_linear_prefit,
            "converged": self.converged,
        }


def _as_pairs(h, q):
    h = np.asarray(h, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if h.shape != q.shape:
        raise ValueError("h and q must have the same length")
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(q))):
        raise ValueError("stage and discharge values must be finite")
    return h, q


def _lstsq_poly(h, q, degree):
    if len(np.unique(h)) < degree + 1:
        raise RankDeficient(f"need {degree + 1} distinct levels, got {len(np.unique(h))}")
    vander = np.vander(h, degree + 1)
    coef, *_ = np.linalg.lstsq(vander, q, rcond=None)
    return coef


def fit_quadratic(h, q) -> QuadraticCurve:
    """Ordinary least-squares ``Q = aH^2 + bH + c``."""
    h, q = _as_pairs(h, q)
    a, b, c = _lstsq_poly(h, q, 2)
    return QuadraticCurve(float(a), float(b), float(c))


def relative_residuals(curve, h, q, q_floor: float = Q_FLOOR) -> np.ndarray:
    pred = curve(h)
    return np.abs(q - pred) / np.maximum(np.abs(pred), q_floor)


def _iterate(h, q, start, degree, rel_threshold, max_iter, q_floor, guard_slope):
    """Refit on inliers until the inlier set stops changing.

    Returns ``(curve, inliers, iterations, fixed_point)``; ``curve`` is None if
    ``guard_slope`` is set and a fit turned downward on the inlier range.
    """
    inl = start.copy()
    curve = None
    for it in range(1, max_iter + 1):
        if inl.sum() < degree + 1:
            raise TooFewInliers(f"only {int(inl.sum())} inliers left")
        coef = _lstsq_poly(h[inl], q[inl], degree)
        coef = np.concatenate([np.zeros(3 - len(coef)), coef])
        curve = QuadraticCurve(*map(float, coef))
        if guard_slope and curve.min_slope(h[inl].min(), h[inl].max()) < 0:
            return None, inl, it, False
        new = relative_residuals(curve, h, q, q_floor) <= rel_threshold
        if np.array_equal(new, inl):
            return curve, inl, it, True
        inl = new
    return curve, inl, max_iter, False


def iterative_fit(
    h,
    q,
    rel_threshold: float = REL_THRESHOLD,
    max_iter: int = MAX_ITER,
    q_floor: float = Q_FLOOR,
) -> FitReport:
    """Quadratic fit with iterative relative-residual outlier rejection.

    A point is an outlier when ``|q - Q(h)| / max(|Q(h)|, q_floor)`` exceeds
    ``rel_threshold``.  Residuals are recomputed for all points at each pass,
    so a point rejected early can come back.  If a quadratic fit falls on the
    inlier level range, gross outliers are first removed with the same loop on
    a straight line and the quadratic loop restarts from its inliers.
    """
    h, q = _as_pairs(h, q)
    if len(h) < 4:
        raise TooFewInliers("iterative fit needs at least 4 pairs")
    everything = np.ones(len(h), dtype=bool)

    curve, inl, iters, fixed = _iterate(h, q, everything, 2, rel_threshold, max_iter, q_floor, True)
    used_linear = False
    if curve is None:
        used_linear = True
        _, lin_inl, lin_iters, _ = _iterate(h, q, everything, 1, rel_threshold, max_iter, q_floor, False)
        curve, inl, iters2, fixed = _iterate(h, q, lin_inl, 2, rel_threshold, max_iter, q_floor, False)
        iters = iters + lin_iters + iters2
    if inl.sum() < 3:
        raise TooFewInliers(f"only {int(inl.sum())} inliers left")
    return FitReport(
        curve,
        [int(i) for i in np.flatnonzero(inl)],
        [int(i) for i in np.flatnonzero(~inl)],
        iters,
        used_linear,
        fixed,
    )


# ---------------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class CalibratedCurve:
    base: QuadraticCurve
    centers: np.ndarray
    sigmas: np.ndarray
    weights: np.ndarray
    ridge: float

    def correction(self, h):
        h = np.asarray(h, dtype=float)
        d = h[..., None] - self.centers
        return np.exp(np.exp(-(d * d) / (2.0 * self.sigmas**2)) @ self.weights)

    def __call__(self, h):
        return eval_calibrated(self, h)

    def monotonic_on(self, lo: float, hi: float, n: int = 1000) -> bool:
        """Diagnostic only: is the calibrated curve nondecreasing on a grid?"""
        grid = np.linspace(lo, hi, n)
        return bool(np.all(np.diff(self(grid)) >= 0))

    def to_dict(self):
        return {
            "base": self.base.to_dict(),
            "centers": self.centers.tolist(),
            "sigmas": self.sigmas.tolist(),
            "weights": self.weights.tolist(),
            "ridge": self.ridge,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            QuadraticCurve(**d["base"]),
            np.asarray(d["centers"], dtype=float),
            np.asarray(d["sigmas"], dtype=float),
            np.asarray(d["weights"], dtype=float),
            float(d["ridge"]),
        )


def rbf_bandwidths(centers, sigma_min: float = SIGMA_MIN) -> np.ndarray:
    """Distance to the nearest other control, floored at ``sigma_min``."""
    c = np.asarray(centers, dtype=float)
    if len(c) == 1:
        return np.array([10.0 * sigma_min])
    d = np.abs(c[:, None] - c[None, :])
    np.fill_diagonal(d, np.inf)
    return np.maximum(d.min(axis=1), sigma_min)


def rbf_calibrate(base: QuadraticCurve, h_star, q_star, ridge: float = RIDGE, sigma_min: float = SIGMA_MIN) -> CalibratedCurve:
    """Pin the base curve to control measurements with a log-space Gaussian RBF.

    Solves ``(Phi + ridge * I) w = log(q*) - log(base(h*))`` with
    ``Phi[i, j] = exp(-(h_i* - h_j*)^2 / (2 sigma_j^2))``.
    """
    hs = np.atleast_1d(np.asarray(h_star, dtype=float))
    qs = np.atleast_1d(np.asarray(q_star, dtype=float))
    if hs.shape != qs.shape or hs.size < 1:
        raise ValueError("need matching, non-empty control levels and discharges")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    if np.any(qs <= 0):
        raise ValueError("control discharges must be positive")
    if len(np.unique(hs)) != len(hs):
        raise DuplicateControls("control levels must be distinct")
    qb = base(hs)
    if np.any(qb <= 0):
        raise NonPositiveBase(f"base curve is not positive at controls {hs[qb <= 0].tolist()}")
    sig = rbf_bandwidths(hs, sigma_min)
    d = hs[:, None] - hs[None, :]
    phi = np.exp(-(d * d) / (2.0 * sig[None, :] ** 2))
    y = np.log(qs) - np.log(qb)
    w = np.linalg.solve(phi + ridge * np.eye(len(hs)), y)
    return CalibratedCurve(base, hs, sig, w, float(ridge))


def eval_calibrated(c: CalibratedCurve, h):
    return c.base(h) * c.correction(h)
