"""Goodness-of-fit tests and Monte Carlo estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc

from .splitcore import DomainError


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    reps: int

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.value - 1.96 * self.stderr, self.value + 1.96 * self.stderr)

    @classmethod
    def from_samples(cls, x) -> "Estimate":
        x = np.asarray(x, dtype=np.float64)
        if x.size < 2:
            raise DomainError("need at least two samples for a standard error")
        return cls(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)), int(x.size))

    @classmethod
    def proportion(cls, hits: int, reps: int) -> "Estimate":
        p = hits / reps
        return cls(p, math.sqrt(p * (1 - p) / reps), reps)

    def within(self, target: float, k: float = 4.0) -> bool:
        return abs(self.value - target) <= k * self.stderr

    def to_dict(self) -> dict:
        lo, hi = self.ci95
        return {"value": self.value, "stderr": self.stderr, "reps": self.reps, "ci95": [lo, hi]}


@dataclass(frozen=True)
class TestResult:
    """Outcome of a goodness-of-fit test; passes when p_value > threshold."""

    name: str
    statistic: float
    p_value: float
    threshold: float
    df: int | None = None

    __test__ = False  # not a pytest class

    @property
    def passed(self) -> bool:
        return self.p_value > self.threshold

    def to_dict(self) -> dict:
        d = {"name": self.name, "statistic": self.statistic, "p_value": self.p_value,
             "threshold": self.threshold, "pass": self.passed}
        if self.df is not None:
            d["df"] = self.df
        return d


def kolmogorov_sf(x: float) -> float:
    """P(sup |B| > x) for the Brownian bridge: sum_{k>=1} (-1)^{k-1} 2 exp(-2 k^2 x^2)."""
    if x <= 0:
        return 1.0
    if x < 1.0:
        # theta-function form converges fast for small x
        s = 0.0
        for k in range(1, 40):
            s += math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8 * x * x))
        return min(1.0, max(0.0, 1.0 - math.sqrt(2 * math.pi) / x * s))
    s = 0.0
    for k in range(1, 101):
        term = 2.0 * math.exp(-2.0 * k * k * x * x)
        s += term if k % 2 else -term
        if term < 1e-18:
            break
    return min(1.0, max(0.0, s))


def ks_statistic(samples, cdf) -> float:
    x = np.sort(np.asarray(samples, dtype=np.float64))
    m = x.size
    if m == 0:
        raise DomainError("KS test needs at least one sample")
    F = np.asarray(cdf(x), dtype=np.float64)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - F), np.max(F - (i - 1) / m)))


def ks_test(samples, cdf, threshold: float = 0.01, name: str = "ks") -> TestResult:
    """One-sample two-sided Kolmogorov-Smirnov test with the asymptotic p-value."""
    d = ks_statistic(samples, cdf)
    m = len(samples)
    return TestResult(name, d, kolmogorov_sf(math.sqrt(m) * d), threshold)


def ks_2samp(a, b, threshold: float = 0.01, name: str = "ks2") -> TestResult:
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise DomainError("two-sample KS needs non-empty samples")
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    en = math.sqrt(a.size * b.size / (a.size + b.size))
    return TestResult(name, d, kolmogorov_sf(en * d), threshold)


def exponential_cdf(rate: float):
    return lambda x: -np.expm1(-rate * np.maximum(x, 0.0))


def normal_cdf(x):
    from scipy.special import ndtr

    return ndtr(x)


def chi2_sf(stat: float, df: int) -> float:
    return float(gammaincc(df / 2.0, stat / 2.0)) if stat > 0 else 1.0


def chi_square(observed, expected_probs, threshold: float = 1e-3, name: str = "chi2") -> TestResult:
    """Pearson goodness of fit against cell probabilities; df = cells - 1."""
    obs = np.asarray(observed, dtype=np.float64)
    p = np.asarray(expected_probs, dtype=np.float64)
    if obs.shape != p.shape:
        raise DomainError("observed and expected must have the same number of cells")
    if np.any(p <= 0):
        raise DomainError("expected probabilities must be positive")
    total = obs.sum()
    if total < 50:
        raise DomainError("chi-square needs at least 50 observations")
    exp = total * p / p.sum()
    stat = float(np.sum((obs - exp) ** 2 / exp))
    df = len(obs) - 1
    return TestResult(name, stat, chi2_sf(stat, df), threshold, df)


def chi_square_homogeneity(counts_a, counts_b, threshold: float = 1e-3, name: str = "chi2_2samp") -> TestResult:
    """Two-sample test that two count vectors come from the same cell distribution."""
    table = np.vstack([np.asarray(counts_a, float), np.asarray(counts_b, float)])
    keep = table.sum(axis=0) > 0
    table = table[:, keep]
    if table.sum() < 50:
        raise DomainError("chi-square needs at least 50 observations")
    rows = table.sum(axis=1, keepdims=True)
    cols = table.sum(axis=0, keepdims=True)
    exp = rows * cols / table.sum()
    stat = float(np.sum((table - exp) ** 2 / exp))
    df = table.shape[1] - 1
    return TestResult(name, stat, chi2_sf(stat, df), threshold, df)


@dataclass(frozen=True)
class Check:
    """Tolerance check on a computed value. ``asserted=False`` marks report-only numerics."""

    name: str
    value: float
    target: float | None
    tolerance: float | None
    passed: bool
    asserted: bool = True
    note: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "target": self.target, "tolerance": self.tolerance,
                "pass": self.passed, "asserted": self.asserted, "note": self.note}


def check_close(name: str, value: float, target: float, tol: float, asserted: bool = True, note: str = "") -> Check:
    return Check(name, float(value), float(target), float(tol), bool(abs(value - target) <= tol), asserted, note)


def check_estimate(name: str, est: Estimate, target: float, k: float = 4.0, asserted: bool = True, note: str = "") -> Check:
    tol = k * est.stderr
    return Check(name, est.value, float(target), tol, bool(abs(est.value - target) <= tol), asserted, note)


def check_in(name: str, value: float, lo: float, hi: float, asserted: bool = True, note: str = "") -> Check:
    mid = (lo + hi) / 2
    return Check(name, float(value), mid, (hi - lo) / 2, bool(lo <= value <= hi), asserted, note)


def check_true(name: str, ok: bool, value: float = math.nan, asserted: bool = True, note: str = "") -> Check:
    return Check(name, float(value), None, None, bool(ok), asserted, note)
