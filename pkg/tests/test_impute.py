import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hydrostat.errors import DisconnectedMissingNode, LevelOutOfRange, NoObservations, NoUsablePairs
from hydrostat.impute import (
    CrossSectionGeometry,
    energy,
    energy_grad,
    impute,
    learn_potentials,
    pair_support,
    total_discharge,
)
from hydrostat.kde import log_pdf2
from hydrostat.synth import HistorySpec, five_node_history, gen_history


def grid_minimizer(model, obs, k, lo, hi, n=10_000):
    observed = obs > 0
    grid = np.linspace(lo, hi, n)
    best, arg = math.inf, None
    for x in grid:
        v = obs.copy()
        v[k] = x
        e = energy(model, v, observed)
        if e < best:
            best, arg = e, x
    return arg, grid[1] - grid[0]


@pytest.fixture(scope="module")
def five_node_model():
    hist, _ = five_node_history()
    return learn_potentials(hist)


def test_pair_support_counts_joint_presence():
    hist = np.array([[1.0, 0.0, 2.0], [1.0, 1.0, 0.0], [0.5, 0.5, 0.5]])
    np.testing.assert_array_equal(pair_support(hist), [[3, 2, 2], [2, 2, 1], [2, 1, 2]])


def test_pairs_below_min_samples_are_skipped():
    hist, _ = gen_history(HistorySpec(T=40, gains=(1.0, 2.0, 3.0), jitter=0.05, seed=1))
    hist[:, 2][5:] = 0.0  # segment 2 seen only 5 times
    model = learn_potentials(hist, min_samples=6)
    assert set(model.potentials) == {(0, 1)}


def test_no_usable_pairs():
    with pytest.raises(NoUsablePairs):
        learn_potentials(np.ones((3, 2)), min_samples=5)


def test_energy_counts_only_mixed_pairs(five_node_model):
    v = np.array([0.5, 0.8, 1.0, 0.8, 0.5])
    observed = np.array([True, True, False, True, True])
    expect = 0.0
    for (i, j), pot in five_node_model.potentials.items():
        if observed[i] != observed[j]:
            expect -= float(log_pdf2(pot.kde, v[i], v[j]))
    assert energy(five_node_model, v, observed) == expect
    assert energy(five_node_model, v, np.ones(5, bool)) == 0.0


def test_energy_grad_matches_finite_differences(five_node_model):
    observed = np.array([True, False, False, True, True])
    v = np.array([0.5, 0.75, 0.95, 0.8, 0.5])
    g = energy_grad(five_node_model, v, observed)
    for k in (1, 2):
        e = np.zeros(5)
        e[k] = 1e-6
        fd = (energy(five_node_model, v + e, observed) - energy(five_node_model, v - e, observed)) / 2e-6
        assert g[k] == pytest.approx(fd, rel=1e-5, abs=1e-6)


def test_five_node_centre(five_node_model):
    obs = np.array([0.5, 0.8, 0.0, 0.8, 0.5])
    res = impute(five_node_model, obs)
    assert res.v_star[2] == pytest.approx(1.0, abs=0.05)
    assert res.imputed == [2]
    assert res.energy_final <= res.energy_initial


def test_matches_grid_search(five_node_model):
    obs = np.array([0.5, 0.8, 0.0, 0.8, 0.5])
    res = impute(five_node_model, obs)
    x, dx = grid_minimizer(five_node_model, obs, 2, 0.2, 2.0)
    assert abs(res.v_star[2] - x) <= dx


def test_observed_entries_are_bit_identical(five_node_model):
    obs = np.array([0.5123456789, 0.0, 0.0, 0.81, 0.4999999])
    res = impute(five_node_model, obs)
    assert res.v_star[[0, 3, 4]].tobytes() == obs[[0, 3, 4]].tobytes()
    assert np.all(res.v_star >= 1e-6)


def test_complete_observation_returned_unchanged(five_node_model):
    obs = np.array([0.5, 0.8, 1.0, 0.8, 0.5])
    res = impute(five_node_model, obs)
    assert res.v_star.tobytes() == obs.tobytes()
    assert res.imputed == []


def test_no_observations(five_node_model):
    with pytest.raises(NoObservations):
        impute(five_node_model, np.zeros(5))


def test_disconnected_missing_node():
    hist, _ = gen_history(HistorySpec(T=60, gains=(1.0, 1.5, 2.0), jitter=0.05, seed=2))
    full = learn_potentials(hist)
    # only segments 0 and 1 are linked; segment 2 is observed, both others missing
    model = type(full)(3, {(0, 1): full.potentials[(0, 1)]})
    with pytest.raises(DisconnectedMissingNode):
        impute(model, np.array([0.0, 0.0, 1.5]))


def test_partially_disconnected_is_reported():
    hist, _ = gen_history(HistorySpec(T=60, gains=(1.0, 1.5, 2.0), jitter=0.05, seed=2))
    model = learn_potentials(hist)
    model = type(model)(3, {(0, 1): model.potentials[(0, 1)]})
    res = impute(model, np.array([0.9, 0.0, 0.0]))
    assert res.imputed == [1]
    assert res.disconnected == [2]


def test_doubled_segment_history():
    hist, _ = gen_history(HistorySpec(T=400, gains=(1.0, 2.0), base=(0.1, 0.6), jitter=0.02, seed=4))
    res = impute(learn_potentials(hist), np.array([0.4, 0.0]))
    assert res.v_star[1] == pytest.approx(0.8, rel=0.03)


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 1000),
    observed_mask=st.lists(st.booleans(), min_size=5, max_size=5).filter(lambda m: any(m) and not all(m)),
    scale=st.floats(0.3, 1.7),
)
def test_energy_never_increases(five_node_model, seed, observed_mask, scale):
    base = np.array([0.5, 0.8, 1.0, 0.8, 0.5]) * scale
    noise = np.random.default_rng(seed).normal(1.0, 0.05, size=5)
    obs = np.where(observed_mask, base * noise, 0.0)
    res = impute(five_node_model, obs)
    assert res.energy_final <= res.energy_initial
    assert np.array_equal(res.v_star[np.array(observed_mask)], obs[np.array(observed_mask)])


# -- discharge ------------------------------------------------------------------


def test_total_discharge_interpolates_areas():
    geo = CrossSectionGeometry([0.0, 2.0], [[0.0, 0.0], [4.0, 2.0]])
    assert total_discharge([1.0, 2.0], geo, 1.0) == pytest.approx(1.0 * 2.0 + 2.0 * 1.0)


def test_level_out_of_range():
    geo = CrossSectionGeometry([0.0, 2.0], [[0.0, 0.0], [4.0, 2.0]])
    with pytest.raises(LevelOutOfRange):
        total_discharge([1.0, 1.0], geo, 2.5)


def test_geometry_validation():
    with pytest.raises(ValueError):
        CrossSectionGeometry([0.0, 0.0], [[1.0], [2.0]])
    with pytest.raises(ValueError):
        CrossSectionGeometry([0.0, 1.0], [[2.0], [1.0]])
