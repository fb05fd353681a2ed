import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sinkrate.divergence import kl, kl_from_log_ratio, log_sum_exp, total_variation

# 0.5 ln(4/3), 50-digit arithmetic
KL_HALF_QUARTER = 0.14384103622589046


def test_log_sum_exp_total_mass_one():
    assert log_sum_exp([0.0, 0.0], np.log([0.5, 0.5])) == pytest.approx(0.0, abs=1e-16)


def test_log_sum_exp_single_term_exact():
    assert log_sum_exp([1.25], [-0.75]) == 0.5


def test_log_sum_exp_no_overflow():
    assert log_sum_exp([1000.0, 1000.0], np.log([0.5, 0.5])) == pytest.approx(1000.0, rel=1e-15)
    assert log_sum_exp([-1000.0, -1000.0]) == pytest.approx(-1000.0 + math.log(2), rel=1e-15)


def test_log_sum_exp_empty():
    with pytest.raises(ValueError):
        log_sum_exp([])


def test_log_sum_exp_axis():
    v = np.array([[0.0, 1.0], [2.0, 3.0]])
    np.testing.assert_allclose(log_sum_exp(v, axis=1), np.log(np.exp(v).sum(axis=1)), rtol=1e-15)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=30), st.floats(-100, 100))
def test_log_sum_exp_shift_invariance(vals, c):
    v = np.array(vals)
    assert log_sum_exp(v + c) - c == pytest.approx(log_sum_exp(v), abs=1e-12)


def test_kl_values():
    assert kl([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert kl([1.0], [1.0]) == 0.0
    assert kl([0.5, 0.5], [0.25, 0.75]) == pytest.approx(KL_HALF_QUARTER, rel=1e-14)


def test_kl_not_dominated_is_infinite():
    assert kl([0.5, 0.5], [1.0, 0.0]) == math.inf


def test_kl_length_mismatch():
    with pytest.raises(ValueError):
        kl([1.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        total_variation([1.0], [0.5, 0.5])


def test_kl_from_log_ratio_matches_kl():
    p, q = np.array([0.2, 0.8]), np.array([0.6, 0.4])
    assert kl_from_log_ratio(p, np.log(p / q)) == pytest.approx(kl(p, q), rel=1e-15)


def test_total_variation_value():
    assert total_variation([0.9, 0.1], [0.1, 0.9]) == pytest.approx(0.8, rel=1e-15)
    assert total_variation([0.3, 0.7], [0.3, 0.7]) == 0.0


def _prob(draw, n):
    w = np.array(draw(st.lists(st.floats(1e-3, 1.0), min_size=n, max_size=n)))
    return w / w.sum()


@st.composite
def pairs(draw):
    n = draw(st.integers(1, 16))
    return _prob(draw, n), _prob(draw, n)


@given(pairs())
def test_kl_nonnegative_and_pinsker(pq):
    p, q = pq
    h = kl(p, q)
    assert h >= -1e-15
    assert total_variation(p, q) ** 2 <= h / 2 + 1e-12


@given(pairs())
def test_kl_zero_iff_equal(pq):
    p, _ = pq
    assert abs(kl(p, p)) <= 1e-12
