"""Split law, size-bias law, harmonic tables and random streams.

Everything downstream (tree samplers, chain simulation, recurrences) reads the
harmonic prefix table built here, so all code agrees on h_k to the last bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_NMAX = 200_000


class DomainError(ValueError):
    """Argument outside the domain of a distribution or operation."""


# ---------------------------------------------------------------------------
# Harmonic table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HarmonicTable:
    """Prefix sums h[k] = 1 + 1/2 + ... + 1/k for k = 0..n_max (h[0] = 0).

    Accumulated left to right with Neumaier compensation.
    """

    h: np.ndarray

    @classmethod
    def build(cls, n_max: int = DEFAULT_NMAX) -> "HarmonicTable":
        if n_max < 1:
            raise DomainError(f"n_max must be >= 1, got {n_max}")
        h = np.empty(n_max + 1, dtype=np.float64)
        h[0] = 0.0
        s = 0.0
        c = 0.0
        for k in range(1, n_max + 1):
            x = 1.0 / k
            t = s + x
            if abs(s) >= abs(x):
                c += (s - t) + x
            else:
                c += (x - t) + s
            s = t
            h[k] = s + c
        h.flags.writeable = False
        return cls(h)

    @property
    def n_max(self) -> int:
        return len(self.h) - 1

    def __getitem__(self, k):
        return self.h[k]


_TABLE: HarmonicTable | None = None


def configure(n_max: int = DEFAULT_NMAX) -> HarmonicTable:
    """Rebuild the shared harmonic table with capacity ``n_max``."""
    global _TABLE
    _TABLE = HarmonicTable.build(n_max)
    return _TABLE


def harmonic_table(n: int | None = None) -> HarmonicTable:
    """Shared table; grows it when ``n`` exceeds the current capacity."""
    global _TABLE
    if _TABLE is None:
        _TABLE = HarmonicTable.build(max(DEFAULT_NMAX, n or 0))
    elif n is not None and n > _TABLE.n_max:
        _TABLE = HarmonicTable.build(n)
    return _TABLE


def harmonic(k: int) -> float:
    return float(harmonic_table(k).h[k])


# ---------------------------------------------------------------------------
# Reference constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReferenceConstants:
    zeta2: float = math.pi**2 / 6
    zeta3: float = 1.2020569031595942853997381615114
    gamma: float = 0.5772156649015328606065120900824
    # numerically estimated values, used only as comparison targets
    c0: float = 0.7951556604
    c1: float = 0.58
    ell: float = 0.608
    a2: float = 0.6079

    @property
    def mu(self) -> float:
        return 1.0 / self.zeta2

    @property
    def sigma2(self) -> float:
        return 2.0 * self.zeta3

    @property
    def r_inf(self) -> float:
        return self.gamma * self.zeta2 / (2.0 * self.zeta3)

    @property
    def c_height(self) -> float:
        return 1.0 + self.mu + self.mu**3 * self.sigma2 / 2.0

    @property
    def var_const(self) -> float:
        return 2.0 * self.zeta3 / self.zeta2**3

    @property
    def hop_const(self) -> float:
        return 1.0 / (2.0 * self.zeta2)


CONSTANTS = ReferenceConstants()


# ---------------------------------------------------------------------------
# Exact distributions
# ---------------------------------------------------------------------------


def _check_n(n: int, lo: int = 2) -> HarmonicTable:
    if not isinstance(n, (int, np.integer)) or n < lo:
        raise DomainError(f"n must be an integer >= {lo}, got {n!r}")
    table = harmonic_table()
    if n > table.n_max:
        raise DomainError(f"n={n} exceeds N_max={table.n_max}; call configure()")
    return table


def split_pmf(n: int, i: int) -> float:
    """q(n, i) = n / (2 h_{n-1}) * 1 / (i (n - i))."""
    table = _check_n(n)
    if not 1 <= i <= n - 1:
        raise DomainError(f"i must lie in [1, {n - 1}], got {i}")
    return n / (2.0 * table.h[n - 1]) / (i * (n - i))


def split_pmf_vector(n: int) -> np.ndarray:
    """Array of q(n, i) for i = 1..n-1 (index 0 holds i = 1)."""
    table = _check_n(n)
    i = np.arange(1, n, dtype=np.float64)
    return n / (2.0 * table.h[n - 1]) / (i * (n - i))


def sizebias_pmf(m: int, i: int) -> float:
    """q*(m, i) = 1 / (h_{m-1} (m - i)): law of the next clade size on a random leaf's path."""
    table = _check_n(m)
    if not 1 <= i <= m - 1:
        raise DomainError(f"i must lie in [1, {m - 1}], got {i}")
    return 1.0 / (table.h[m - 1] * (m - i))


def sizebias_pmf_vector(m: int) -> np.ndarray:
    table = _check_n(m)
    i = np.arange(1, m, dtype=np.float64)
    return 1.0 / (table.h[m - 1] * (m - i))


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def make_rng(seed: int = 0, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for substream ``stream`` of master ``seed``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream)])
    return np.random.Generator(np.random.Philox(ss))


def harmonic_index(u, m, h: np.ndarray):
    """J with P(J = j) proportional to 1/j on {1..m-1}, by inverting h.

    ``u`` uniform(0,1) (scalar or array), ``m`` clade size(s) >= 2.
    """
    target = np.asarray(u) * h[np.asarray(m) - 1]
    j = np.searchsorted(h, target, side="left")
    return np.clip(j, 1, np.asarray(m) - 1)


def sample_split(n: int, rng: np.random.Generator, size=None):
    """Draw left sub-clade sizes from q(n, .).

    J is harmonic on {1..n-1}; the output is J or n - J with probability 1/2 each,
    which is the mixture 1/(i(n-i)) = (1/i + 1/(n-i)) / n.
    """
    table = _check_n(n)
    u = rng.random(size)
    flip = rng.random(size) < 0.5
    j = harmonic_index(u, n, table.h)
    out = np.where(flip, n - j, j)
    return int(out) if size is None else out.astype(np.int64)


def sample_sizebias(m: int, rng: np.random.Generator, size=None):
    """Draw from q*(m, .) as i = m - J with J harmonic on {1..m-1}."""
    table = _check_n(m)
    j = harmonic_index(rng.random(size), m, table.h)
    out = m - j
    return int(out) if size is None else np.asarray(out, dtype=np.int64)


# ---------------------------------------------------------------------------
# Levy tail of the limiting subordinator
# ---------------------------------------------------------------------------


def levy_tail(a: float) -> float:
    """Tail mass -log(1 - e^{-a}) of the limit Levy measure on [a, inf)."""
    if not a > 0:
        raise DomainError(f"a must be positive, got {a}")
    if a > math.log(2.0):
        return -math.log1p(-math.exp(-a))
    return -math.log(-math.expm1(-a))


def levy_density(a: float) -> float:
    if not a > 0:
        raise DomainError(f"a must be positive, got {a}")
    return math.exp(-a) / -math.expm1(-a)
