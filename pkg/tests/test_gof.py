import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from betasplit import gof
from betasplit.splitcore import DomainError, make_rng


def uniform_cdf(x):
    return np.clip(x, 0.0, 1.0)


def brute_ks(x, cdf):
    x = np.sort(np.asarray(x, dtype=float))
    m = len(x)
    worst = 0.0
    for i, v in enumerate(x):
        f = float(cdf(np.array([v]))[0])
        worst = max(worst, abs((i + 1) / m - f), abs(i / m - f))
    return worst


def test_ks_on_exact_quantiles():
    m = 40
    x = (np.arange(1, m + 1) - 0.5) / m
    assert gof.ks_statistic(x, uniform_cdf) == pytest.approx(1 / (2 * m), abs=1e-15)


def test_ks_single_median_sample():
    assert gof.ks_statistic([0.5], uniform_cdf) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        gof.ks_test([], uniform_cdf)


def test_ks_twenty_points_brute_force():
    x = np.array([0.03, 0.11, 0.12, 0.19, 0.27, 0.33, 0.35, 0.41, 0.48, 0.52,
                  0.55, 0.61, 0.64, 0.71, 0.73, 0.82, 0.86, 0.91, 0.94, 0.99])
    assert abs(gof.ks_statistic(x, uniform_cdf) - brute_ks(x, uniform_cdf)) < 1e-12


@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=60))
def test_ks_statistic_property(xs):
    assert abs(gof.ks_statistic(xs, uniform_cdf) - brute_ks(xs, uniform_cdf)) < 1e-12


def test_kolmogorov_sf_matches_scipy():
    for x in (0.2, 0.5, 0.8, 1.0, 1.36, 2.0, 3.0):
        assert gof.kolmogorov_sf(x) == pytest.approx(sps.kstwobign.sf(x), abs=1e-12)


def test_ks_test_against_scipy_pvalue():
    x = make_rng(1, 60).random(5000)
    res = gof.ks_test(x, uniform_cdf)
    ref = sps.kstest(x, "uniform", method="asymp")
    assert res.statistic == pytest.approx(ref.statistic, abs=1e-12)
    assert res.p_value == pytest.approx(ref.pvalue, rel=1e-6)
    assert res.passed == (res.p_value > 0.01)


def test_ks_2samp_against_scipy():
    rng = make_rng(2, 60)
    a, b = rng.normal(size=3000), rng.normal(size=2000)
    res = gof.ks_2samp(a, b)
    assert res.statistic == pytest.approx(sps.ks_2samp(a, b).statistic, abs=1e-12)


def test_chi_square_proportional_is_zero():
    res = gof.chi_square([25, 50, 25], [0.25, 0.5, 0.25])
    assert res.statistic == 0 and res.p_value == pytest.approx(1.0) and res.df == 2


def test_chi_square_two_cells_vs_binomial_normal():
    n, k, p = 1000, 530, 0.5
    res = gof.chi_square([k, n - k], [p, 1 - p])
    z = (k - n * p) / math.sqrt(n * p * (1 - p))
    assert res.statistic == pytest.approx(z * z)
    assert res.p_value == pytest.approx(2 * sps.norm.sf(abs(z)), rel=1e-10)


def test_chi_square_domain():
    with pytest.raises(DomainError):
        gof.chi_square([10, 10], [0.5, 0.5])  # too few observations
    with pytest.raises(DomainError):
        gof.chi_square([60, 0], [1.0, 0.0])


def test_chi2_sf_matches_scipy():
    for s, df in ((0.5, 1), (3.0, 2), (10.0, 4), (50.0, 30)):
        assert gof.chi2_sf(s, df) == pytest.approx(sps.chi2.sf(s, df), rel=1e-12)


def test_homogeneity_against_scipy():
    a, b = [120, 80, 50], [110, 95, 45]
    res = gof.chi_square_homogeneity(a, b)
    ref = sps.chi2_contingency(np.array([a, b]), correction=False)
    assert res.statistic == pytest.approx(ref[0]) and res.p_value == pytest.approx(ref[1])


def test_estimate_plumbing():
    e = gof.Estimate.from_samples([1.0, 2.0, 3.0, 4.0])
    lo, hi = e.ci95
    assert lo == pytest.approx(e.value - 1.96 * e.stderr) and hi == pytest.approx(e.value + 1.96 * e.stderr)
    assert e.within(2.5) and not e.within(10.0)
    p = gof.Estimate.proportion(30, 100)
    assert p.value == 0.3 and p.stderr == pytest.approx(math.sqrt(0.21 / 100))


def test_checks():
    assert gof.check_close("a", 1.0, 1.05, 0.1).passed
    assert not gof.check_in("b", 3.0, 0.0, 2.0).passed
    c = gof.check_estimate("c", gof.Estimate(1.0, 0.1, 10), 1.3)
    assert c.passed and c.tolerance == pytest.approx(0.4)
    assert gof.check_true("d", False, asserted=False).asserted is False
