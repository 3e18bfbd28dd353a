import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
import mpmath
from scipy import integrate

from betasplit import gof
from betasplit.splitcore import (
    CONSTANTS,
    DomainError,
    HarmonicTable,
    harmonic,
    levy_tail,
    make_rng,
    sample_sizebias,
    sample_split,
    sizebias_pmf,
    sizebias_pmf_vector,
    split_pmf,
    split_pmf_vector,
)


def exact_q(n, i):
    h = sum(Fraction(1, j) for j in range(1, n))
    return Fraction(n, 1) / (2 * h * i * (n - i))


def test_harmonic_table_matches_fractions():
    tab = HarmonicTable.build(200)
    acc = Fraction(0)
    for k in range(1, 201):
        acc += Fraction(1, k)
        assert tab.h[k] == pytest.approx(float(acc), rel=1e-15, abs=0)
    assert tab.h[0] == 0.0
    assert np.all(np.diff(tab.h) > 0)


def test_harmonic_scalar():
    assert harmonic(0) == 0.0
    assert harmonic(3) == pytest.approx(11 / 6, abs=1e-15)


def test_constants_against_mpmath():
    c = CONSTANTS
    z2, z3 = mpmath.zeta(2), mpmath.zeta(3)
    mu = 1 / z2
    assert c.mu == pytest.approx(float(mu), rel=1e-15)
    assert c.r_inf == pytest.approx(float(mpmath.euler * z2 / (2 * z3)), rel=1e-14)
    assert c.c_height == pytest.approx(float(1 + mu + mu**3 * z3), rel=1e-14)
    assert c.var_const == pytest.approx(float(2 * z3 / z2**3), rel=1e-14)
    assert 0.6079 < c.mu < 0.6080
    assert 0.3949 < c.r_inf < 0.3950
    # printed as 1.878...; the exact value 1.8779991 rounds to it
    assert round(c.c_height, 3) == 1.878


@pytest.mark.parametrize("n,i,expected", [(2, 1, 1.0), (3, 1, 0.5), (3, 2, 0.5),
                                          (4, 1, 4 / 11), (4, 2, 3 / 11), (4, 3, 4 / 11)])
def test_split_pmf_small_values(n, i, expected):
    assert split_pmf(n, i) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("m,i,expected", [(2, 1, 1.0), (3, 1, 1 / 3), (3, 2, 2 / 3),
                                          (4, 1, 2 / 11), (4, 2, 3 / 11), (4, 3, 6 / 11)])
def test_sizebias_pmf_small_values(m, i, expected):
    assert sizebias_pmf(m, i) == pytest.approx(expected, abs=1e-15)


@given(st.integers(2, 60), st.data())
def test_split_pmf_against_rational_oracle(n, data):
    i = data.draw(st.integers(1, n - 1))
    assert split_pmf(n, i) == pytest.approx(float(exact_q(n, i)), rel=1e-13)


@pytest.mark.parametrize("bad", [(1, 1), (4, 0), (4, 4), (0, 0)])
def test_split_pmf_domain(bad):
    with pytest.raises(DomainError):
        split_pmf(*bad)
    with pytest.raises(DomainError):
        sizebias_pmf(*bad)


def test_pmf_vectors_normalised_and_symmetric():
    for n in (2, 3, 10, 1000, 10_000):
        q = split_pmf_vector(n)  # q[i - 1] = q(n, i)
        assert math.fsum(q) == pytest.approx(1.0, abs=1e-10)
        np.testing.assert_allclose(q, q[::-1], rtol=1e-13)
        qs = sizebias_pmf_vector(n)
        assert math.fsum(qs) == pytest.approx(1.0, abs=1e-10)
        i = np.arange(1, n)
        np.testing.assert_allclose(qs, 2 * i / n * q, rtol=1e-12, atol=1e-15)


def test_sum_of_squares_identity():
    for m in (2, 3, 7, 100, 1000):
        i = np.arange(1, m)
        q = split_pmf_vector(m)
        lhs = math.fsum((m * m - i * i - (m - i) ** 2) * q)
        assert lhs == pytest.approx(m * (m - 1) / harmonic(m - 1), abs=1e-9 * m)


def test_sample_split_trivial(rng):
    assert np.all(sample_split(2, rng, size=1000) == 1)
    assert sample_sizebias(2, rng) == 1


def test_sample_split_n4_frequencies():
    counts = np.zeros(3, dtype=np.int64)
    for s in range(10):
        x = sample_split(4, make_rng(s, 11), size=100_000)
        counts += np.bincount(x, minlength=4)[1:]
    res = gof.chi_square(counts, [4 / 11, 3 / 11, 4 / 11])
    assert res.passed, res
    p = counts / counts.sum()
    se = np.sqrt(np.array([4, 3, 4]) / 11 * np.array([7, 8, 7]) / 11 / counts.sum())
    assert np.all(np.abs(p - np.array([4, 3, 4]) / 11) < 4 * se)


def test_sample_split_large_n_ks():
    n = 10_000
    x = sample_split(n, make_rng(3, 11), size=100_000)
    cdf = np.concatenate([[0.0], np.cumsum(split_pmf_vector(n))])
    # randomised PIT makes the discrete law continuous
    u = cdf[x - 1] + make_rng(3, 12).random(x.size) * (cdf[x] - cdf[x - 1])
    assert gof.ks_test(u, lambda v: np.clip(v, 0, 1)).passed


def test_sample_sizebias_m3_frequency():
    x = sample_sizebias(3, make_rng(5, 11), size=1_000_000)
    p = np.mean(x == 2)
    assert abs(p - 2 / 3) < 4 * math.sqrt(2 / 9 / x.size)


@pytest.mark.parametrize("seed", range(3))
def test_sampler_chi_square_per_seed(seed):
    m = 12
    x = sample_sizebias(m, make_rng(seed, 11), size=50_000)
    res = gof.chi_square(np.bincount(x, minlength=m)[1:m], sizebias_pmf_vector(m))
    assert res.passed, res


def test_sample_split_domain(rng):
    with pytest.raises(DomainError):
        sample_split(1, rng)


def test_levy_tail_values():
    assert levy_tail(math.log(2)) == pytest.approx(math.log(2), rel=1e-15)
    a = 10.0
    series = math.exp(-a) + math.exp(-2 * a) / 2 + math.exp(-3 * a) / 3
    assert levy_tail(a) == pytest.approx(series, rel=1e-12)
    assert levy_tail(1e-12) == pytest.approx(-math.log(1e-12), rel=1e-9)
    with pytest.raises(DomainError):
        levy_tail(0.0)


def test_levy_tail_integral_is_zeta2():
    val, _ = integrate.quad(levy_tail, 0, np.inf, epsabs=1e-12, limit=200)
    assert abs(val - math.pi**2 / 6) < 1e-8


def test_rng_streams_are_reproducible_and_distinct():
    a = make_rng(1, 2).random(5)
    assert np.array_equal(a, make_rng(1, 2).random(5))
    assert not np.array_equal(a, make_rng(1, 3).random(5))
