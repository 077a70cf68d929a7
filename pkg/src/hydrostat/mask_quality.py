"""Shoreline-prior quality score for water masks and mask-to-level conversion."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyRoi, InsufficientWaterColumns

DEFAULT_THRESHOLD = 25.0  # px^2, i.e. a 5 px standard deviation


@dataclass(frozen=True)
class QualityReport:
    q: float
    corrected: np.ndarray
    accepted: bool
    roi: tuple[int, int]

    def to_dict(self):
        return {"quality": self.q, "accepted": self.accepted, "roi": list(self.roi)}


@dataclass(frozen=True)
class LevelCalibration:
    """Affine virtual staff gauge: ``level = gain * row + offset``."""

    gain: float
    offset: float
    valid_rows: tuple[float, float] | None = field(default=None)

    def __post_init__(self):
        if self.gain == 0:
            raise ValueError("calibration gain must be nonzero")

    def level_at_row(self, row):
        return self.gain * row + self.offset


def as_mask(data) -> np.ndarray:
    m = np.asarray(data)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError("mask must be a non-empty 2-D array")
    if m.dtype != bool:
        if not np.all((m == 0) | (m == 1)):
            raise ValueError("mask entries must be 0 or 1")
        m = m.astype(bool)
    return m


def column_density(m) -> np.ndarray:
    """Number of water pixels in each column."""
    return as_mask(m).sum(axis=0).astype(float)


def slope_correct(profile, s: float, x_ref: float | None = None) -> np.ndarray:
    """Remove the prior shoreline trend: ``y(x) - s * (x - x_ref)``.

    Columns are indexed from 1 as in the usual statement of the score, so the
    default ``x_ref = W / 2`` sits at the middle of the row of columns.
    """
    y = np.asarray(profile, dtype=float)
    if x_ref is None:
        x_ref = len(y) / 2.0
    x = np.arange(1, len(y) + 1, dtype=float)
    return y - s * (x - x_ref)


def _roi_slice(n, roi):
    if roi is None:
        return 0, n
    lo, hi = int(roi[0]), int(roi[1])
    lo = max(lo, 0)
    hi = min(hi, n)
    if hi <= lo:
        raise EmptyRoi(f"roi {roi} selects no columns")
    return lo, hi


def quality_score(corrected, roi=None) -> float:
    """Population variance of the corrected profile over ``roi = (lo, hi)`` (half-open)."""
    y = np.asarray(corrected, dtype=float)
    lo, hi = _roi_slice(len(y), roi)
    seg = y[lo:hi]
    return float(np.mean((seg - seg.mean()) ** 2))


def accept(q: float, threshold: float = DEFAULT_THRESHOLD) -> bool:
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    return bool(q <= threshold)


def assess(m, s: float, threshold: float = DEFAULT_THRESHOLD, roi=None, x_ref=None) -> QualityReport:
    """Run density, slope correction, scoring and acceptance in one call."""
    prof = column_density(m)
    corr = slope_correct(prof, s, x_ref)
    lo, hi = _roi_slice(len(corr), roi)
    q = quality_score(corr, (lo, hi))
    return QualityReport(q, corr, accept(q, threshold), (lo, hi))


def boundary_rows(m, min_run: int = 3) -> np.ndarray:
    """Row of the water boundary in each column, NaN for dry columns.

    The boundary is the topmost row that starts a vertical run of at least
    ``min_run`` water pixels, which keeps isolated speckle above the shoreline
    from being taken for water.  ``min_run=1`` gives the plain topmost water row.
    """
    m = as_mask(m)
    h, _ = m.shape
    if min_run < 1:
        raise ValueError("min_run must be >= 1")
    run = m.copy()
    for k in range(1, min(min_run, h)):
        run[: h - k] &= m[k:]
        run[h - k:] = False
    if min_run > h:
        run[:] = False
    has = run.any(axis=0)
    first = np.argmax(run, axis=0).astype(float)
    first[~has] = np.nan
    return first


def level_from_mask(m, cal: LevelCalibration, roi=None, min_run: int = 3, min_fraction: float = 0.25) -> float:
    """Water level from the median boundary row across the roi columns."""
    rows = boundary_rows(m, min_run)
    lo, hi = _roi_slice(len(rows), roi)
    rows = rows[lo:hi]
    usable = rows[np.isfinite(rows)]
    if len(usable) == 0 or len(usable) < min_fraction * len(rows):
        raise InsufficientWaterColumns(
            f"{len(usable)} of {len(rows)} roi columns contain water"
        )
    return float(cal.level_at_row(np.median(usable)))
