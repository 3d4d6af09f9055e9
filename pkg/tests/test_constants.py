import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from walklab.constants import (
    compute_gamma, derive_all, dimension_constants, gamma_error_bound, gamma_n_profile,
    green_at_origin, truncation_bias_bound,
)
from walklab.lattice import ConfigurationError


def test_gamma_d3_matches_watson_closed_form():
    assert abs(compute_gamma(3) - oracles.watson_gamma_d3()) < 1e-10


def test_gamma_d3_matches_reduced_lattice_integral():
    assert abs(compute_gamma(3) - oracles.reduced_lattice_integral_gamma_d3()) < 1e-9


@pytest.mark.parametrize("d", [4, 5])
def test_gamma_matches_return_probability_series(d):
    assert abs(compute_gamma(d) - oracles.return_series_gamma(d)) < 1e-7


def test_gamma_increases_with_dimension():
    values = [compute_gamma(d) for d in range(3, 9)]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert values[0] == pytest.approx(0.659463, abs=1e-6)


def test_gamma_errors():
    for d in (1, 2):
        with pytest.raises(ConfigurationError):
            compute_gamma(d)
    with pytest.raises(ValueError):
        compute_gamma(3, tolerance=1e-12)
    assert gamma_error_bound(3) < 1e-10
    g, err = green_at_origin(3)
    assert g == pytest.approx(1.516386059151978, abs=1e-12) and err < 1e-10


def test_derived_constants_d3():
    c = dimension_constants(3)
    assert c.alpha == pytest.approx(0.2540308, abs=1e-6)
    assert c.lam == pytest.approx(0.928306, abs=1e-6)
    assert c.p == pytest.approx(0.5105773, abs=1e-6)
    assert c.kappa == pytest.approx(2.56593, abs=1e-5)
    assert c.weight_C == pytest.approx(3.2738, abs=1e-4)
    assert c.weight_A == pytest.approx(2.2571, abs=1e-4)
    # closed form gives 1.4767692
    assert c.sum_max == pytest.approx(1.47678, abs=2e-5)
    assert c.diff_max == pytest.approx(0.77016, abs=1e-5)
    assert c.escape_sphere == pytest.approx(0.322756, abs=1e-6)


@given(st.integers(3, 12), st.floats(0.05, 0.999))
@settings(max_examples=200)
def test_identities_hold_for_any_gamma(d, frac):
    # keep p = 1 - 1/(2d(1-gamma)) positive
    gamma = frac * (1 - 1 / (2 * d))
    c = derive_all(d, gamma)
    assert abs(c.p - (1 - 1 / (2 * d * (1 - gamma)))) < 1e-12
    assert abs(c.lam / (1 - c.p) - 2 * d * c.lam * (1 - gamma)) < 1e-12 * max(1, c.lam / (1 - c.p))
    assert abs((1 - c.alpha) - 1 / (2 - gamma)) < 1e-12
    assert 0 < c.alpha < 0.5 and c.lam > 0


@pytest.mark.parametrize("d", range(3, 9))
def test_invariants_for_actual_dimensions(d):
    c = dimension_constants(d)
    assert 0 < c.gamma < 1 and 0 < c.alpha < 0.5 and 0 < c.p < 1
    assert c.kappa > c.lam > 0


def test_derive_all_rejects_bad_gamma():
    for g in (0.0, 1.0, -0.1, 1.5, 0.9):
        with pytest.raises(ValueError):
            derive_all(3, g)


def test_to_dict_uses_lambda_key():
    rec = dimension_constants(3).to_dict()
    assert "lambda" in rec and "lam" not in rec


def test_truncation_bias_bound_shrinks_with_cap():
    assert truncation_bias_bound(3, 10**4) < 0.01
    assert truncation_bias_bound(3, 10**6) < truncation_bias_bound(3, 10**4)
    assert truncation_bias_bound(5, 100) < truncation_bias_bound(3, 100)
    with pytest.raises(ValueError):
        truncation_bias_bound(3, 0)


def test_gamma_n_profile_small_n_exact():
    prof = dict((n, est) for n, est, _ in gamma_n_profile(3, [1, 2, 3], 6000, seed=1))
    assert prof[1] == 1.0 and prof[2] == 1.0
    # no return in the first two steps fails only if step 2 reverses step 1
    assert abs(prof[3] - 5 / 6) < 4 * math.sqrt(5 / 36 / 6000)


def test_gamma_n_profile_envelope():
    c = dimension_constants(3)
    grid = [100, 300, 1000, 3000]
    prof = gamma_n_profile(3, grid, 20_000, seed=2)
    est = np.array([e for _, e, _ in prof])
    se = np.array([s for _, _, s in prof])
    # nonincreasing: the same walks are examined at every n
    assert np.all(np.diff(est) <= 0)
    assert np.all(est >= c.gamma - 3 * se)
    scaled = (est - c.gamma) * np.sqrt(grid)
    assert np.all(np.abs(scaled) <= 3.0)
