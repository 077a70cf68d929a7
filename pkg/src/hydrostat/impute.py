"""Pairwise-density imputation of missing cross-section velocities.

Each cross-section segment is a node.  For every pair of segments a 2-D
Gaussian KDE is learned from the historical rows in which both are present.
A partially observed velocity vector is completed by minimizing the summed
negative log-density over the pairs that link one missing and one observed
segment, with observed values held fixed and missing ones kept >= 1e-6.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DisconnectedMissingNode, LevelOutOfRange, NoObservations, NoUsablePairs
from .kde import DENSITY_FLOOR, Kde2, _exponents, log_pdf2

EPSILON = 1e-6
MIN_SAMPLES = 5
MAX_ITER = 200
GTOL = 1e-6
_LOG_FLOOR = math.log(DENSITY_FLOOR)


@dataclass(frozen=True)
class PairPotential:
    i: int
    j: int
    kde: Kde2

    @property
    def support(self) -> int:
        return len(self.kde)


@dataclass(frozen=True)
class EnergyModel:
    n: int
    potentials: dict  # (i, j) with i < j -> PairPotential

    def get(self, i, j):
        return self.potentials.get((i, j) if i < j else (j, i))

    def neighbors(self, k):
        return [a if b == k else b for (a, b) in self.potentials if k in (a, b)]


@dataclass
class ImputationResult:
    v_star: np.ndarray
    energy_initial: float
    energy_final: float
    iterations: int
    converged: bool
    imputed: list = field(default_factory=list)
    disconnected: list = field(default_factory=list)
    energy_trace: list = field(default_factory=list)

    def to_dict(self):
        return {
            "v_star": [float(x) for x in self.v_star],
            "energy_initial": self.energy_initial,
            "energy_final": self.energy_final,
            "iterations": self.iterations,
            "converged": self.converged,
            "imputed": list(self.imputed),
            "disconnected": list(self.disconnected),
            "energy_trace": [float(e) for e in self.energy_trace],
        }


def as_flow_matrix(hist) -> np.ndarray:
    h = np.asarray(hist, dtype=float)
    if h.ndim != 2 or h.shape[1] < 2:
        raise ValueError("flow matrix must be T x N with N >= 2")
    if np.any(h < 0) or not np.all(np.isfinite(h)):
        raise ValueError("flow matrix entries must be finite and >= 0 (0 = missing)")
    return h


def pair_support(hist) -> np.ndarray:
    """``counts[i, j]`` = rows where both segments are present."""
    present = (as_flow_matrix(hist) > 0).astype(int)
    return present.T @ present


def learn_potentials(hist, min_samples: int = MIN_SAMPLES) -> EnergyModel:
    h = as_flow_matrix(hist)
    t, n = h.shape
    if t < min_samples:
        raise NoUsablePairs(f"history has {t} rows, fewer than min_samples={min_samples}")
    present = h > 0
    pots = {}
    for i, j in itertools.combinations(range(n), 2):
        both = present[:, i] & present[:, j]
        if both.sum() >= max(min_samples, 2):
            pots[(i, j)] = PairPotential(i, j, Kde2(np.column_stack([h[both, i], h[both, j]])))
    if not pots:
        raise NoUsablePairs("no segment pair has enough joint observations")
    return EnergyModel(n, pots)


def _active_pairs(model, observed):
    for (i, j), pot in model.potentials.items():
        if observed[i] != observed[j]:
            yield pot


def energy(model: EnergyModel, v, observed) -> float:
    """Negative log-likelihood over pairs with exactly one observed endpoint."""
    v = np.asarray(v, dtype=float)
    observed = np.asarray(observed, dtype=bool)
    if v.shape != (model.n,) or observed.shape != (model.n,):
        raise ValueError("v and observed must have length N")
    e = 0.0
    for pot in _active_pairs(model, observed):
        e -= float(log_pdf2(pot.kde, v[pot.i], v[pot.j]))
    return e


def energy_grad(model: EnergyModel, v, observed) -> np.ndarray:
    """Gradient of :func:`energy`; zero on the floored plateau."""
    v = np.asarray(v, dtype=float)
    observed = np.asarray(observed, dtype=bool)
    g = np.zeros(model.n)
    for pot in _active_pairs(model, observed):
        k = pot.kde
        zi, zj, ex = _exponents(k, v[pot.i], v[pot.j])
        if float(log_pdf2(k, v[pot.i], v[pot.j])) <= _LOG_FLOOR:
            continue
        w = np.exp(ex - ex.max())
        w /= w.sum()
        g[pot.i] += float(w @ zi) / k.h[0]
        g[pot.j] += float(w @ zj) / k.h[1]
    return g


def impute(model: EnergyModel, observation, maxiter: int = MAX_ITER, gtol: float = GTOL) -> ImputationResult:
    """Fill the zero entries of ``observation`` by bound-constrained minimization."""
    obs = np.asarray(observation, dtype=float)
    if obs.shape != (model.n,):
        raise ValueError(f"observation must have length {model.n}")
    if np.any(obs < 0) or not np.all(np.isfinite(obs)):
        raise ValueError("observation entries must be finite and >= 0")
    observed = obs > 0
    if not observed.any():
        raise NoObservations("observation vector has no nonzero entries")
    missing = np.flatnonzero(~observed)
    v0 = obs.copy()
    v0[missing] = obs[observed].mean()
    if missing.size == 0:
        return ImputationResult(obs.copy(), 0.0, 0.0, 0, True)

    connected = [m for m in missing if any(observed[k] for k in model.neighbors(m))]
    disconnected = [int(m) for m in missing if m not in connected]
    if not connected:
        raise DisconnectedMissingNode(
            f"missing segments {disconnected} have no potential linking them to an observed segment"
        )
    free = np.asarray(connected, dtype=int)

    def full(x):
        v = v0.copy()
        v[free] = x
        return v

    def fun(x):
        v = full(x)
        return energy(model, v, observed), energy_grad(model, v, observed)[free]

    e0 = energy(model, v0, observed)
    trace = [e0]
    res = minimize(
        fun,
        v0[free],
        jac=True,
        method="L-BFGS-B",
        bounds=[(EPSILON, None)] * len(free),
        callback=lambda xk: trace.append(energy(model, full(xk), observed)),
        options={"maxiter": maxiter, "gtol": gtol, "ftol": 0.0},
    )
    v_star = full(res.x)
    e1 = energy(model, v_star, observed)
    if e1 > e0:
        v_star, e1 = v0.copy(), e0
    # observed coordinates come straight from the input, untouched by the optimizer
    v_star[observed] = obs[observed]
    grad = energy_grad(model, v_star, observed)[free]
    # projected gradient: components pushing against the lower bound do not count
    at_bound = v_star[free] <= EPSILON
    pg = np.where(at_bound, np.minimum(grad, 0.0), grad)
    converged = bool(np.max(np.abs(pg)) < gtol) if len(pg) else True
    return ImputationResult(
        v_star,
        e0,
        e1,
        int(res.nit),
        converged,
        imputed=[int(m) for m in free],
        disconnected=disconnected,
        energy_trace=trace,
    )


@dataclass(frozen=True)
class CrossSectionGeometry:
    """Wetted area per segment tabulated against water level."""

    levels: np.ndarray  # (L,) increasing
    areas: np.ndarray  # (L, N)

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float)
        ar = np.asarray(self.areas, dtype=float)
        if ar.ndim == 1:
            ar = ar[:, None]
        if lv.ndim != 1 or ar.shape[0] != lv.size or lv.size < 1:
            raise ValueError("areas must be (len(levels), N)")
        if np.any(np.diff(lv) <= 0):
            raise ValueError("levels must be strictly increasing")
        if np.any(ar < 0) or np.any(np.diff(ar, axis=0) < 0):
            raise ValueError("areas must be >= 0 and nondecreasing in level")
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "areas", ar)

    @property
    def n(self):
        return self.areas.shape[1]

    def areas_at(self, level: float) -> np.ndarray:
        if not self.levels[0] <= level <= self.levels[-1]:
            raise LevelOutOfRange(f"level {level} outside [{self.levels[0]}, {self.levels[-1]}]")
        return np.array([np.interp(level, self.levels, self.areas[:, k]) for k in range(self.n)])


def total_discharge(velocities, geometry: CrossSectionGeometry, level: float) -> float:
    """Sum of segment velocity times interpolated wetted area."""
    v = np.asarray(velocities, dtype=float)
    if v.shape != (geometry.n,):
        raise ValueError(f"expected {geometry.n} velocities")
    if np.any(v < 0):
        raise ValueError("velocities must be >= 0")
    return float(v @ geometry.areas_at(level))
