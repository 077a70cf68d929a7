import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hydrostat.errors import EmptyRoi, InsufficientWaterColumns
from hydrostat.mask_quality import (
    LevelCalibration,
    accept,
    assess,
    boundary_rows,
    column_density,
    level_from_mask,
    quality_score,
    slope_correct,
)
from hydrostat.synth import MaskSpec, gen_mask


def brute_force_q(mask, s, x_ref):
    """Column loop with explicit sums, no vectorisation."""
    h, w = len(mask), len(mask[0])
    ys = []
    for j in range(w):
        count = 0
        for i in range(h):
            count += int(mask[i][j])
        ys.append(count - s * ((j + 1) - x_ref))
    mean = sum(ys) / w
    return sum((y - mean) ** 2 for y in ys) / w


def test_column_density_counts_water():
    m = np.array([[0, 1, 0], [1, 1, 0], [1, 1, 1]])
    assert column_density(m).tolist() == [2.0, 3.0, 1.0]


def test_slope_correct_one_based_reference():
    y = slope_correct([10, 11, 12, 13], 1.0)
    # x = 1..4, x_ref = 2
    assert y.tolist() == [11.0, 11.0, 11.0, 11.0]


def test_perfect_slanted_shoreline_scores_zero():
    mask, _ = gen_mask(MaskSpec(H=64, W=40, r0=30, slope=1.0))
    rep = assess(mask, 1.0)
    assert rep.q == pytest.approx(0.0, abs=1e-9)
    assert rep.accepted


def test_flat_shoreline_zero_slope():
    mask, _ = gen_mask(MaskSpec(H=32, W=50, r0=12))
    assert assess(mask, 0.0).q == 0.0


def test_corrupted_column_matches_brute_force():
    mask, _ = gen_mask(MaskSpec(H=64, W=40, r0=30, slope=1.0, corrupted=(7,)))
    rep = assess(mask, 1.0)
    assert rep.q > 0
    assert abs(rep.q - brute_force_q(mask.tolist(), 1.0, 20.0)) < 1e-12


def test_half_integer_slope_rounding_bound():
    # the boundary is rounded to whole rows, so the residual is at most 1/2 px
    mask, _ = gen_mask(MaskSpec(H=64, W=41, r0=30, slope=0.5))
    assert assess(mask, 0.5).q <= 0.25


def test_roi_is_half_open():
    y = np.array([0.0, 0.0, 10.0, 10.0])
    assert quality_score(y, (0, 2)) == 0.0
    assert quality_score(y, (1, 3)) == 25.0


def test_empty_roi():
    with pytest.raises(EmptyRoi):
        quality_score(np.zeros(5), (3, 3))


def test_accept_is_inclusive():
    assert accept(25.0, 25.0)
    assert not accept(25.0 + 1e-9, 25.0)
    with pytest.raises(ValueError):
        accept(1.0, 0.0)


def test_single_column_roi_scores_zero():
    mask, _ = gen_mask(MaskSpec(H=16, W=10, r0=5, flip_prob=0.2, seed=3))
    assert assess(mask, 0.0, roi=(4, 5)).q == 0.0


def test_non_binary_mask_rejected():
    with pytest.raises(ValueError):
        column_density(np.array([[0, 2], [1, 1]]))


@settings(max_examples=60, deadline=None)
@given(
    w=st.integers(2, 30),
    h=st.integers(2, 30),
    s=st.floats(-2, 2),
    shift=st.floats(-50, 50),
    seed=st.integers(0, 10_000),
)
def test_q_is_shift_invariant_and_nonnegative(w, h, s, shift, seed):
    mask = np.random.default_rng(seed).integers(0, 2, size=(h, w))
    corr = slope_correct(column_density(mask), s)
    q = quality_score(corr)
    assert q >= 0
    assert quality_score(corr + shift) == pytest.approx(q, abs=1e-9 * (1 + q + shift**2))


@settings(max_examples=60, deadline=None)
@given(w=st.integers(2, 30), h=st.integers(2, 30), s=st.floats(-2, 2), seed=st.integers(0, 10_000))
def test_q_agrees_with_brute_force(w, h, s, seed):
    mask = np.random.default_rng(seed).integers(0, 2, size=(h, w))
    got = assess(mask, s).q
    assert got == pytest.approx(brute_force_q(mask.tolist(), s, w / 2.0), rel=1e-9, abs=1e-9)


# -- level ----------------------------------------------------------------------


def test_boundary_rows_clean():
    mask, truth = gen_mask(MaskSpec(H=20, W=8, r0=9, slope=0.0))
    assert boundary_rows(mask).tolist() == truth["boundary_rows"]


def test_boundary_skips_speckle_above_shoreline():
    m = np.zeros((10, 1), dtype=np.uint8)
    m[2, 0] = 1  # isolated speckle
    m[6:, 0] = 1
    assert boundary_rows(m, min_run=3)[0] == 6
    assert boundary_rows(m, min_run=1)[0] == 2


def test_dry_columns_are_nan():
    m = np.zeros((5, 3), dtype=np.uint8)
    m[2:, 1] = 1
    rows = boundary_rows(m)
    assert np.isnan(rows[0]) and rows[1] == 2 and np.isnan(rows[2])


def test_level_uses_calibration():
    mask, _ = gen_mask(MaskSpec(H=40, W=30, r0=15))
    cal = LevelCalibration(gain=-0.01, offset=5.0)
    assert level_from_mask(mask, cal) == pytest.approx(5.0 - 0.15)


def test_level_needs_water():
    mask = np.zeros((10, 10), dtype=np.uint8)
    with pytest.raises(InsufficientWaterColumns):
        level_from_mask(mask, LevelCalibration(1.0, 0.0))


def test_zero_gain_rejected():
    with pytest.raises(ValueError):
        LevelCalibration(0.0, 1.0)


def test_level_under_flip_noise():
    cal = LevelCalibration(gain=-0.02, offset=10.0)
    hits = 0
    for seed in range(40):
        mask, truth = gen_mask(MaskSpec(H=80, W=60, r0=40, flip_prob=0.02, seed=seed))
        true_level = cal.level_at_row(np.median(truth["boundary_rows"]))
        hits += abs(level_from_mask(mask, cal) - true_level) <= abs(cal.gain)
    assert hits >= 38
