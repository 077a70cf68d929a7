import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hydrostat.errors import DuplicateControls, NonPositiveBase, RankDeficient, TooFewInliers
from hydrostat.rating import (
    CalibratedCurve,
    QuadraticCurve,
    fit_quadratic,
    iterative_fit,
    rbf_bandwidths,
    rbf_calibrate,
    relative_residuals,
)
from hydrostat.synth import gen_rating

TRUE = (5.0, 2.0, 1.0)


def adversarial_pairs():
    """Gross outliers concentrated at the lowest stages drag a plain fit downward."""
    h = np.linspace(0.5, 3.0, 40)
    q = 5 * h * h + 2 * h + 1
    out = np.zeros(40, bool)
    for k in range(8):
        q[k] *= 1 + 3 + 5 * k / 7
        out[k] = True
    return h, q, out


def test_exact_quadratic_recovered():
    h, q, _ = gen_rating(*TRUE, n=30)
    c = fit_quadratic(h, q)
    assert np.allclose([c.a, c.b, c.c], TRUE, rtol=0, atol=1e-9)
    rep = iterative_fit(h, q)
    assert rep.outliers == [] and rep.iterations == 1 and not rep.used_linear_prefit


def test_relative_residual_definition():
    c = QuadraticCurve(0.0, 0.0, 10.0)
    r = relative_residuals(c, np.array([1.0, 2.0]), np.array([12.0, 7.0]))
    np.testing.assert_allclose(r, [0.2, 0.3])


def test_relative_residual_floor():
    c = QuadraticCurve(0.0, 0.0, 0.0)
    assert relative_residuals(c, np.array([1.0]), np.array([1e-6]), q_floor=1e-6)[0] == pytest.approx(1.0)


def test_injected_outliers_are_all_flagged():
    h, q, is_out = gen_rating(*TRUE, n=50, outlier_frac=0.1, outlier_mag=0.8, seed=3)
    rep = iterative_fit(h, q)
    assert set(rep.outliers) == set(np.flatnonzero(is_out))
    c = rep.curve
    assert np.all(np.abs(np.array([c.a, c.b, c.c]) - TRUE) <= 0.02 * np.abs(TRUE))


def test_one_percent_noise_is_unbiased_over_seeds():
    # single draws scatter b and c by ~10% (the coefficients are strongly
    # correlated on a short stage range); their seed average sits on the truth
    est = []
    for seed in range(100):
        h, q, _ = gen_rating(*TRUE, n=50, noise=0.01, seed=seed)
        c = iterative_fit(h, q).curve
        est.append((c.a, c.b, c.c))
    mean = np.mean(est, axis=0)
    assert np.all(np.abs(mean - TRUE) <= 0.02 * np.abs(TRUE))


def test_linear_prefit_path():
    h, q, out = adversarial_pairs()
    plain = fit_quadratic(h, q)
    assert plain.min_slope(h.min(), h.max()) < 0
    rep = iterative_fit(h, q)
    assert rep.used_linear_prefit
    assert set(rep.outliers) == set(np.flatnonzero(out))
    assert rep.curve.min_slope(h.min(), h.max()) >= 0
    assert np.allclose([rep.curve.a, rep.curve.b, rep.curve.c], TRUE, atol=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_final_partition_is_a_fixed_point(seed):
    # residuals are re-evaluated on every pair, so the reported split must be
    # exactly the one the final curve induces
    h, q, _ = gen_rating(*TRUE, n=40, noise=0.05, outlier_frac=0.15, seed=seed)
    rep = iterative_fit(h, q)
    assert rep.converged
    rel = relative_residuals(rep.curve, h, q)
    assert rep.outliers == [int(i) for i in np.flatnonzero(rel > 0.2)]


def test_too_few_pairs():
    with pytest.raises(TooFewInliers):
        iterative_fit([1, 2, 3], [1, 2, 3])


def test_rank_deficient_levels():
    with pytest.raises(RankDeficient):
        fit_quadratic([1.0, 1.0, 2.0, 2.0], [1.0, 1.1, 2.0, 2.1])


@settings(max_examples=40, deadline=None)
@given(
    a=st.floats(0.1, 10),
    b=st.floats(0.0, 10),
    c=st.floats(0.1, 10),
    scale=st.floats(0.01, 100),
    seed=st.integers(0, 1000),
)
def test_fit_is_scale_equivariant_in_q(a, b, c, scale, seed):
    h, q, _ = gen_rating(a, b, c, n=25, noise=0.02, seed=seed)
    r1 = iterative_fit(h, q)
    r2 = iterative_fit(h, scale * q)
    assert r1.inliers == r2.inliers
    np.testing.assert_allclose(
        [r2.curve.a, r2.curve.b, r2.curve.c],
        scale * np.array([r1.curve.a, r1.curve.b, r1.curve.c]),
        rtol=1e-6,
        atol=1e-9 * scale * (abs(a) + abs(b) + abs(c)),
    )


# -- calibration ----------------------------------------------------------------

BASE = QuadraticCurve(*TRUE)


def test_interpolates_controls_without_ridge():
    hs = np.array([1.0, 1.8, 2.6])
    qs = BASE(hs) * np.array([1.1, 0.93, 1.05])
    cal = rbf_calibrate(BASE, hs, qs, ridge=0.0)
    np.testing.assert_allclose(cal(hs), qs, rtol=1e-9)


def test_small_ridge_stays_close():
    hs = np.array([1.0, 1.8, 2.6])
    qs = BASE(hs) * np.array([1.1, 0.93, 1.05])
    cal = rbf_calibrate(BASE, hs, qs, ridge=1e-8)
    assert np.all(np.abs(cal(hs) / qs - 1) < 0.005)


def test_far_field_returns_to_base():
    hs = np.array([1.0, 1.8, 2.6])
    cal = rbf_calibrate(BASE, hs, BASE(hs) * 1.2, ridge=0.0)
    far = np.array([15.0, 30.0])
    np.testing.assert_allclose(cal(far) / BASE(far), 1.0, atol=1e-6)


def test_controls_on_base_give_zero_weights():
    hs = np.array([1.0, 1.8, 2.6])
    cal = rbf_calibrate(BASE, hs, BASE(hs))
    assert np.all(cal.weights == 0.0)


def test_bandwidths_nearest_spacing_with_floor():
    np.testing.assert_allclose(rbf_bandwidths([1.0, 1.01, 2.0]), [0.05, 0.05, 0.99])
    assert rbf_bandwidths([2.0])[0] == pytest.approx(0.5)


def test_duplicate_controls():
    with pytest.raises(DuplicateControls):
        rbf_calibrate(BASE, [1.0, 1.0], [20.0, 21.0])


def test_nonpositive_base():
    with pytest.raises(NonPositiveBase):
        rbf_calibrate(QuadraticCurve(0.0, 1.0, -5.0), [1.0, 6.0], [2.0, 3.0])


def test_calibrated_round_trip_through_dict():
    hs = np.array([1.0, 2.0])
    cal = rbf_calibrate(BASE, hs, BASE(hs) * 1.1)
    back = CalibratedCurve.from_dict(cal.to_dict())
    np.testing.assert_array_equal(back(np.linspace(0, 4, 9)), cal(np.linspace(0, 4, 9)))


@settings(max_examples=40, deadline=None)
@given(
    factors=st.lists(st.floats(0.5, 2.0), min_size=1, max_size=5),
    seed=st.integers(0, 1000),
)
def test_interpolation_property(factors, seed):
    hs = np.sort(np.random.default_rng(seed).uniform(0.5, 3.0, size=len(factors)))
    if len(hs) > 1 and np.min(np.diff(hs)) < 0.05:
        hs = 0.5 + 0.4 * np.arange(len(hs))
    qs = BASE(hs) * np.array(factors)
    cal = rbf_calibrate(BASE, hs, qs, ridge=0.0)
    np.testing.assert_allclose(cal(hs), qs, rtol=1e-8)
