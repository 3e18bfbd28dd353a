"""Size-bias chain: simulation, exact recurrences and occupation probabilities.

The chain of clade sizes on the root path of a uniform random leaf jumps
m -> i with probability 1 / (h_{m-1} (m - i)) and, in continuous time, holds an
Exponential(h_{m-1}) time in state m. State 1 is absorbing.

All O(N^2) sums use Neumaier-compensated accumulation. The ``method="fast"``
variants evaluate the same recurrences by divide-and-conquer online
convolution (FFT blocks), O(N log^2 N).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.signal import fftconvolve

from .splitcore import CONSTANTS, DomainError, harmonic_table, sample_sizebias

# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainPath:
    """States n = s_0 > s_1 > ... > 1 and, in continuous mode, one hold per non-absorbing state."""

    states: tuple
    holds: tuple | None = None

    def __post_init__(self):
        s = self.states
        if not s or s[-1] != 1:
            raise DomainError("a chain path ends in state 1")
        if any(b >= a for a, b in zip(s, s[1:])):
            raise DomainError("states must strictly decrease")
        if self.holds is not None and len(self.holds) != len(s) - 1:
            raise DomainError("one hold per non-absorbing state")

    @property
    def hops(self) -> int:
        return len(self.states) - 1

    @property
    def depth(self) -> float:
        if self.holds is None:
            raise DomainError("discrete path has no holding times")
        return math.fsum(self.holds)


def simulate_chain(n: int, rng: np.random.Generator, mode: str = "continuous") -> ChainPath:
    """One trajectory of the size-bias chain from ``n`` to absorption."""
    if mode not in ("discrete", "continuous"):
        raise DomainError(f"mode must be 'discrete' or 'continuous', got {mode!r}")
    if n < 1:
        raise DomainError("n must be >= 1")
    h = harmonic_table(n).h
    states = [n]
    while states[-1] > 1:
        states.append(sample_sizebias(states[-1], rng))
    holds = None
    if mode == "continuous":
        idx = np.array(states[:-1], dtype=np.int64) - 1
        holds = tuple(float(x) for x in rng.standard_exponential(len(idx)) / h[idx])
    return ChainPath(tuple(states), holds)


@dataclass
class PathSummary:
    """Per-replicate summaries of many chains started at the same ``n``.

    ``clock`` is the sum over visited states m of hold_m / m.
    ``penultimate`` is the last state before absorption (0 when n = 1).
    ``visits[r, i]`` records whether chain r visited state i (i <= max_state).
    """

    n: int
    depth: np.ndarray
    hops: np.ndarray
    clock: np.ndarray
    penultimate: np.ndarray
    visits: np.ndarray | None = None


def simulate_paths(n: int, reps: int, rng: np.random.Generator, visit_states: int = 0) -> PathSummary:
    """Vectorised simulation of ``reps`` independent continuous-time chains."""
    if n < 1:
        raise DomainError("n must be >= 1")
    h = harmonic_table(n).h
    state = np.full(reps, n, dtype=np.int64)
    depth = np.zeros(reps)
    clock = np.zeros(reps)
    hops = np.zeros(reps, dtype=np.int64)
    pen = np.zeros(reps, dtype=np.int64)
    visits = None
    if visit_states:
        visits = np.zeros((reps, visit_states + 1), dtype=bool)
        if n <= visit_states:
            visits[:, n] = True
    active = np.flatnonzero(state > 1)
    while active.size:
        m = state[active]
        hold = rng.standard_exponential(active.size) / h[m - 1]
        depth[active] += hold
        clock[active] += hold / m
        j = np.searchsorted(h, rng.random(active.size) * h[m - 1])
        j = np.clip(j, 1, m - 1)
        nxt = m - j
        pen[active] = m
        state[active] = nxt
        hops[active] += 1
        if visits is not None:
            small = nxt <= visit_states
            visits[active[small], nxt[small]] = True
        active = active[nxt > 1]
    return PathSummary(n, depth, hops, clock, pen, visits)


# ---------------------------------------------------------------------------
# O(N^2) reference kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _forward_kernel(c, h, N):
    """f[1] = 0; f[n] = (c[n] + sum_{i<n} f[i] / (n - i)) / h[n-1]."""
    f = np.zeros(N + 1)
    inv = np.zeros(N + 1)
    for d in range(1, N + 1):
        inv[d] = 1.0 / d
    for n in range(2, N + 1):
        s = 0.0
        comp = 0.0
        for i in range(1, n):
            x = f[i] * inv[n - i]
            t = s + x
            if abs(s) >= abs(x):
                comp += (s - t) + x
            else:
                comp += (x - t) + s
            s = t
        f[n] = (c[n] + (s + comp)) / h[n - 1]
    return f


@numba.njit(cache=True)
def _backward_kernel(h, n):
    """v[n] = 1; v[m] = sum_{j>m} v[j] / (h[j-1] (j - m))."""
    v = np.zeros(n + 1)
    w = np.zeros(n + 1)
    inv = np.zeros(n + 1)
    for d in range(1, n + 1):
        inv[d] = 1.0 / d
    v[n] = 1.0
    w[n] = 1.0 / h[n - 1] if n >= 2 else 0.0
    for m in range(n - 1, 0, -1):
        s = 0.0
        comp = 0.0
        for j in range(m + 1, n + 1):
            x = w[j] * inv[j - m]
            t = s + x
            if abs(s) >= abs(x):
                comp += (s - t) + x
            else:
                comp += (x - t) + s
            s = t
        v[m] = s + comp
        if m >= 2:
            w[m] = v[m] / h[m - 1]
    return v


# ---------------------------------------------------------------------------
# divide-and-conquer online convolution
# ---------------------------------------------------------------------------

_LEAF_BLOCK = 64


def online_convolution(length: int, kernel: np.ndarray, finalize, f: np.ndarray | None = None) -> np.ndarray:
    """Solve f[r] += sum_{s<r} g[s] * kernel[r - s] with g[s] = finalize(s, f[s]).

    ``f`` carries any initial (non-convolution) terms. Returns g.
    """
    f = np.zeros(length) if f is None else np.asarray(f, dtype=np.float64).copy()
    g = np.zeros(length)

    def solve(lo: int, hi: int):
        if hi - lo <= _LEAF_BLOCK:
            for s in range(lo, hi):
                g[s] = finalize(s, f[s])
                if s + 1 < hi:
                    f[s + 1 : hi] += g[s] * kernel[1 : hi - s]
            return
        mid = (lo + hi) // 2
        solve(lo, mid)
        conv = fftconvolve(g[lo:mid], kernel[1 : hi - lo])
        f[mid:hi] += conv[mid - lo - 1 : hi - lo - 1]
        solve(mid, hi)

    solve(0, length)
    return g


def _inverse_kernel(N: int) -> np.ndarray:
    k = np.zeros(N + 1)
    k[1:] = 1.0 / np.arange(1, N + 1)
    return k


def _forward_fast(c: np.ndarray, h: np.ndarray, N: int) -> np.ndarray:
    # index shift: position r holds state r + 1
    kernel = _inverse_kernel(N)

    def fin(r, acc):
        state = r + 1
        return 0.0 if state == 1 else (c[state] + acc) / h[state - 1]

    g = online_convolution(N, kernel, fin)
    out = np.zeros(N + 1)
    out[1:] = g
    return out


def _backward_fast(h: np.ndarray, n: int) -> np.ndarray:
    # position r holds state n - r; g[r] = v / h[state - 1]
    kernel = _inverse_kernel(n)
    v = np.zeros(n + 1)

    def fin(r, acc):
        state = n - r
        val = 1.0 if r == 0 else acc
        v[state] = val
        return val / h[state - 1] if state >= 2 else 0.0

    online_convolution(n, kernel, fin)
    return v


# ---------------------------------------------------------------------------
# recurrences
# ---------------------------------------------------------------------------


def _check_N(N: int):
    if N < 1:
        raise DomainError("N must be >= 1")
    return harmonic_table(N).h


def _forward(c, h, N, method):
    if method == "reference":
        return _forward_kernel(c, h, N)
    if method == "fast":
        return _forward_fast(c, h, N)
    raise DomainError(f"unknown method {method!r}")


def depth_mean_recurrence(N: int, method: str = "reference") -> np.ndarray:
    """t[n] = E D_n for n = 0..N (t[0] unused, t[1] = 0)."""
    h = _check_N(N)
    return _forward(np.ones(N + 1), h, N, method)


def depth_second_moment_recurrence(N: int, t: np.ndarray | None = None, method: str = "reference"):
    """(m2, var): m2[n] = (2 t[n] + sum_i m2[i] / (n - i)) / h[n-1].

    From D_n = Exponential(h_{n-1}) + D_I with I ~ q*(n, .) independent of the hold.
    """
    h = _check_N(N)
    if t is None:
        t = depth_mean_recurrence(N, method)
    m2 = _forward(2.0 * t[: N + 1], h, N, method)
    return m2, m2 - t[: N + 1] ** 2


def hop_mean_recurrence(N: int, method: str = "reference") -> np.ndarray:
    """thop[n] = 1 + sum_i q*(n, i) thop[i], thop[1] = 0."""
    h = _check_N(N)
    c = np.zeros(N + 1)
    c[1:] = h[:N]
    return _forward(c, h, N, method)


def occupancy(n: int, method: str = "reference") -> np.ndarray:
    """a[i] = P(chain from n ever visits i) for i = 1..n (a[0] unused)."""
    if n < 1:
        raise DomainError("n must be >= 1")
    h = harmonic_table(n).h
    if method == "reference":
        return _backward_kernel(h, n)
    if method == "fast":
        return _backward_fast(h, n)
    raise DomainError(f"unknown method {method!r}")


@dataclass
class NumericTable:
    """Exact recurrence outputs indexed by state (index 0 unused)."""

    N: int
    t: np.ndarray
    m2: np.ndarray
    var: np.ndarray
    thop: np.ndarray
    a: np.ndarray
    meta: dict = field(default_factory=dict)

    @classmethod
    def compute(cls, N: int, method: str = "reference") -> "NumericTable":
        t = depth_mean_recurrence(N, method)
        m2, var = depth_second_moment_recurrence(N, t, method)
        thop = hop_mean_recurrence(N, method)
        a = occupancy(N, method)
        meta = {"method": method, "summation": "Neumaier compensated" if method == "reference" else "FFT blocks"}
        return cls(N, t, m2, var, thop, a, meta)


def identity_residuals(n: int, a: np.ndarray, t: np.ndarray, thop: np.ndarray) -> tuple[float, float]:
    """Residuals of t[n] = sum_i a(n,i)/h[i-1] and thop[n] = sum_i a(n,i), i = 2..n."""
    h = harmonic_table(n).h
    s_t = math.fsum(a[2 : n + 1] / h[1:n])
    s_hop = math.fsum(a[2 : n + 1])
    return s_t - t[n], s_hop - thop[n]


# ---------------------------------------------------------------------------
# derived constants
# ---------------------------------------------------------------------------


@dataclass
class LengthConstant:
    value: float
    tail_estimate: float
    a2: float

    @property
    def gap_to_a2(self) -> float:
        return abs(self.value - self.a2)


def length_constant(n: int, a: np.ndarray | None = None) -> LengthConstant:
    """Truncated sum of a(n, m) / (m h_{m-1}) over m = 2..n.

    The tail beyond n is estimated with a_m ~ (6/pi^2) log(m) / m, which gives
    roughly (6/pi^2) / n.
    """
    if n < 2:
        raise DomainError("n must be >= 2")
    h = harmonic_table(n).h
    if a is None:
        a = occupancy(n)
    m = np.arange(2, n + 1)
    value = math.fsum(a[2 : n + 1] / (m * h[1:n]))
    tail = CONSTANTS.mu * math.log(n) / (n * (math.log(n) + CONSTANTS.gamma))
    return LengthConstant(value, tail, float(a[2]))


@dataclass
class FringeStep:
    """Upward transition law from state i using a(n, .) as the occupancy proxy."""

    i: int
    horizon: int
    pmf: np.ndarray  # pmf[j] for j = 0..n (zero outside (i, n])
    raw_mass: float
    truncated: bool

    @property
    def truncation_mass(self) -> float:
        return max(0.0, 1.0 - self.raw_mass)


def fringe_up_pmf(i: int, n: int, a: np.ndarray | None = None, warn_mass: float = 0.05) -> FringeStep:
    """q_up(i, j) = (i a_j) / (j a_i) (q(j, i) + q(j, j - i)) for i < j <= n."""
    if i < 1 or n <= i:
        raise DomainError("need 1 <= i < n")
    h = harmonic_table(n).h
    if a is None:
        a = occupancy(n)
    if not a[i] > 0:
        raise DomainError(f"a({n},{i}) must be positive")
    j = np.arange(i + 1, n + 1)
    # (i/j)(q(j,i) + q(j,j-i)) simplifies to 1 / (h_{j-1} (j - i))
    raw = a[i + 1 : n + 1] / (a[i] * h[j - 1] * (j - i))
    mass = math.fsum(raw)
    truncated = 1.0 - mass > warn_mass
    if truncated:
        warnings.warn(f"fringe step from {i}: truncation mass {1 - mass:.3f} exceeds {warn_mass}")
    pmf = np.zeros(n + 1)
    pmf[i + 1 :] = raw / mass
    return FringeStep(i, n, pmf, mass, truncated)


@dataclass
class FringeSkeleton:
    """Upward clade sizes 1 = s_0 < s_1 < ... with the sibling tree at each step.

    ``sides[j]`` is 'left' or 'right': the side of the sibling relative to the path.
    """

    sizes: list
    siblings: list
    sides: list
    truncated: bool


class FringeSampler:
    """Samples the upward fringe walk; caches the step law for each state."""

    def __init__(self, n: int, a: np.ndarray | None = None):
        self.n = n
        self.a = occupancy(n) if a is None else a
        self._cdf: dict[int, np.ndarray] = {}

    def cdf(self, i: int) -> np.ndarray:
        if i not in self._cdf:
            self._cdf[i] = np.cumsum(fringe_up_pmf(i, self.n, self.a).pmf)
        return self._cdf[i]

    def first_steps(self, reps: int, rng: np.random.Generator) -> np.ndarray:
        cdf = self.cdf(1)
        return np.minimum(np.searchsorted(cdf, rng.random(reps) * cdf[-1], side="right"), self.n)

    def sample(self, levels: int, rng: np.random.Generator, siblings: bool = True) -> FringeSkeleton:
        from .treemodel import sample_dtcs

        if levels < 1:
            raise DomainError("levels must be >= 1")
        sizes, sibs, sides = [1], [], []
        truncated = False
        for _ in range(levels):
            cur = sizes[-1]
            if cur >= self.n:
                truncated = True
                break
            cdf = self.cdf(cur)
            nxt = int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), self.n))
            sizes.append(nxt)
            sides.append("left" if rng.random() < 0.5 else "right")
            sibs.append(sample_dtcs(nxt - cur, rng) if siblings else nxt - cur)
        return FringeSkeleton(sizes, sibs, sides, truncated)


def sample_fringe(levels: int, n: int, rng: np.random.Generator, a: np.ndarray | None = None) -> FringeSkeleton:
    return FringeSampler(n, a).sample(levels, rng)


# ---------------------------------------------------------------------------
# drift and variance of log clade size
# ---------------------------------------------------------------------------


def drift_variance(j: int) -> tuple[float, float]:
    """a(j) = sum_{i<j} (log i - log j)/(j - i), b(j) = sum_{i<j} (log i - log j)^2/(j - i)."""
    if j < 2:
        raise DomainError("j must be >= 2")
    i = np.arange(1, j, dtype=np.float64)
    d = np.log(i / j)
    w = 1.0 / (j - i)
    return math.fsum(d * w), math.fsum(d * d * w)


@dataclass
class C1Trend:
    grid: np.ndarray
    b: np.ndarray
    tail_average: float
    ratio_to_log: np.ndarray


def c1_trend(n: int, a: np.ndarray | None = None, points: int = 25, tail: int = 5) -> C1Trend:
    """b_j = zeta(2) j a(n, j) - log j on a log-spaced grid of j in [10, n/10]."""
    if n < 1000:
        raise DomainError("n must be >= 1000")
    if a is None:
        a = occupancy(n)
    grid = np.unique(np.round(np.logspace(1, math.log10(n / 10), points)).astype(np.int64))
    scaled = CONSTANTS.zeta2 * grid * a[grid]
    b = scaled - np.log(grid)
    return C1Trend(grid, b, float(np.mean(b[-tail:])), scaled / np.log(grid))


def corollary_sums(n: int, a: np.ndarray) -> dict:
    """Partial sums of a_j / log j and a_j / h_{j-1}, each divided by (6/pi^2) log n."""
    h = harmonic_table(n).h
    j = np.arange(2, n + 1)
    s_log = math.fsum(a[2 : n + 1] / np.log(j))
    s_h = math.fsum(a[2 : n + 1] / h[1:n])
    scale = CONSTANTS.mu * math.log(n)
    return {"sum_over_log": s_log, "sum_over_h": s_h, "ratio_log": s_log / scale, "ratio_h": s_h / scale}
