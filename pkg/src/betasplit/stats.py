"""Per-tree statistics: heights, hop counts, branchpoints, lengths, power sums,
hop-path extremes, draw-heights and the drawn width profile.

Kernels work on the raw preorder arrays so they can run inside batch loops.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .splitcore import DomainError, harmonic_table
from .treemodel import CladeTree, TreeBatch, clades_at

# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _leaf_heights(size, left, hold):
    nn = size.shape[0]
    n = size[0]
    birth = np.zeros(nn)
    out = np.zeros(n)
    k = 0
    for i in range(nn):
        if size[i] >= 2:
            b = birth[i] + hold[i]
            birth[i + 1] = b
            birth[i + 2 * left[i]] = b
        else:
            out[k] = birth[i]
            k += 1
    return out


@numba.njit(cache=True)
def _leaf_hops(size, left):
    nn = size.shape[0]
    n = size[0]
    depth = np.zeros(nn, dtype=np.int64)
    out = np.zeros(n, dtype=np.int64)
    k = 0
    for i in range(nn):
        if size[i] >= 2:
            depth[i + 1] = depth[i] + 1
            depth[i + 2 * left[i]] = depth[i] + 1
        else:
            out[k] = depth[i]
            k += 1
    return out


@numba.njit(cache=True)
def _branchpoint(size, left, hold, u, v):
    """Height of the last clade containing leaf positions u != v."""
    i = 0
    lo = 0
    acc = 0.0
    while True:
        acc += hold[i]
        mid = lo + left[i]
        if u < mid and v < mid:
            i = i + 1
        elif u >= mid and v >= mid:
            lo = mid
            i = i + 2 * left[i]
        else:
            return acc


@numba.njit(cache=True)
def _draw_heights(size, left):
    nn = size.shape[0]
    dh = np.zeros(nn, dtype=np.int64)
    for i in range(nn - 1, -1, -1):
        if size[i] >= 2:
            a = dh[i + 1]
            b = dh[i + 2 * left[i]]
            dh[i] = 1 + (a if a > b else b)
    return dh


@numba.njit(cache=True)
def _greedy_path(size, left):
    """Hop length of the path that always enters the larger sub-clade (ties go left)."""
    i = 0
    hops = 0
    ties = 0
    while size[i] >= 2:
        ls = left[i]
        rs = size[i] - ls
        if ls == rs:
            ties += 1
        i = i + 1 if ls >= rs else i + 2 * ls
        hops += 1
    return hops, ties


@numba.njit(cache=True)
def _summary(size, left, hold, pick):
    """(mean height, within-tree variance, max height, total length, height of leaf ``pick``,
    mean hops, max hops, greedy hops)."""
    nn = size.shape[0]
    n = size[0]
    birth = np.zeros(nn)
    depth = np.zeros(nn, dtype=np.int64)
    s1 = 0.0
    s2 = 0.0
    mx = 0.0
    total = 0.0
    picked = 0.0
    hsum = 0
    hmax = 0
    k = 0
    for i in range(nn):
        if size[i] >= 2:
            total += hold[i]
            b = birth[i] + hold[i]
            birth[i + 1] = b
            birth[i + 2 * left[i]] = b
            depth[i + 1] = depth[i] + 1
            depth[i + 2 * left[i]] = depth[i] + 1
        else:
            x = birth[i]
            s1 += x
            if x > mx:
                mx = x
            if k == pick:
                picked = x
            hsum += depth[i]
            if depth[i] > hmax:
                hmax = depth[i]
            k += 1
    mean = s1 / n
    for i in range(nn):
        if size[i] < 2:
            d = birth[i] - mean
            s2 += d * d
    greedy, _ = _greedy_path(size, left)
    return mean, s2 / n, mx, total, picked, hsum / n, float(hmax), float(greedy)


@numba.njit(cache=True)
def _batch_summary(size, left, hold, picks, out):
    for r in range(size.shape[0]):
        res = _summary(size[r], left[r], hold[r], picks[r])
        for c in range(8):
            out[r, c] = res[c]


@numba.njit(cache=True)
def _batch_branchpoints(size, left, hold, us, vs, out):
    for r in range(size.shape[0]):
        out[r] = _branchpoint(size[r], left[r], hold[r], us[r], vs[r])


@numba.njit(cache=True)
def _batch_power_sums(size, powers, out):
    reps, nn = size.shape
    for r in range(reps):
        for c in range(powers.shape[0]):
            p = powers[c]
            acc = 0.0
            for i in range(nn):
                s = size[r, i]
                if s >= 2:
                    acc += float(s) ** p
            out[r, c] = acc


@numba.njit(cache=True)
def _batch_sum_squares(size, left, hold, ts, out):
    """Q_n(t) for each tree and each t in ``ts``."""
    reps, nn = size.shape
    for r in range(reps):
        birth = np.zeros(nn)
        for i in range(nn):
            if size[r, i] >= 2:
                b = birth[i] + hold[r, i]
                birth[i + 1] = b
                birth[i + 2 * left[r, i]] = b
        for c in range(ts.shape[0]):
            t = ts[c]
            q = 0.0
            for i in range(nn):
                s = size[r, i]
                if birth[i] <= t and (s == 1 or birth[i] + hold[r, i] > t):
                    q += s * s
            out[r, c] = q


# ---------------------------------------------------------------------------
# per-tree API
# ---------------------------------------------------------------------------


def leaf_heights(tree: CladeTree) -> np.ndarray:
    """Root-path hold sums, one per leaf in position order."""
    tree._require_times()
    if tree.n == 1:
        return np.zeros(1)
    return _leaf_heights(tree.size, tree.left, tree.hold)


def leaf_hops(tree: CladeTree) -> np.ndarray:
    return _leaf_hops(tree.size, tree.left)


def branchpoint_height(tree: CladeTree, u: int, v: int) -> float:
    tree._require_times()
    if u == v:
        raise DomainError("branchpoint needs two distinct leaves")
    if not (0 <= u < tree.n and 0 <= v < tree.n):
        raise DomainError("leaf position out of range")
    return float(_branchpoint(tree.size, tree.left, tree.hold, u, v))


def sum_squares_at(tree: CladeTree, t: float) -> float:
    """Q_n(t): sum of squared clade sizes at height t."""
    sizes = clades_at(tree, t)
    return float(np.sum(sizes.astype(np.float64) ** 2))


def total_length(tree: CladeTree) -> float:
    """Sum of hold times over internal clades (the n - 1 edges of the bud picture)."""
    tree._require_times()
    return float(tree.hold[tree.internal].sum())


def power_sum(tree: CladeTree, p: float) -> float:
    """Sum of size**p over clades of size >= 2."""
    sizes = tree.size[tree.internal].astype(np.float64)
    return float(np.sum(sizes**p))


@dataclass(frozen=True)
class HopExtremes:
    max_hops: int
    greedy_hops: int
    greedy_ties: int


def hop_extremes(tree: CladeTree) -> HopExtremes:
    hops = leaf_hops(tree)
    g, ties = _greedy_path(tree.size, tree.left)
    return HopExtremes(int(hops.max()), int(g), int(ties))


def draw_heights(tree: CladeTree) -> np.ndarray:
    """Draw-height per node: 0 on leaves, 1 + max over children otherwise."""
    return _draw_heights(tree.size, tree.left)


def width_profile(tree: CladeTree) -> tuple[np.ndarray, int]:
    """W(h) for h = 0..dh(root) - 1 and the drawn length sum_h W(h).

    W(h) counts clades with draw-height <= h whose parent has draw-height >= h + 1.
    """
    dh = draw_heights(tree)
    top = int(dh[0])
    diff = np.zeros(top + 2, dtype=np.int64)
    par = tree.parents()
    child = np.flatnonzero(par >= 0)
    np.add.at(diff, dh[child], 1)
    np.add.at(diff, dh[par[child]], -1)
    W = np.cumsum(diff)[:top]
    return W, int(W.sum())


@dataclass
class TreeStats:
    leaf_heights: np.ndarray | None
    leaf_hops: np.ndarray
    max_height: float | None
    total_length: float | None
    mean_hops: float
    max_hops: int
    greedy_hops: int
    greedy_ties: int
    power_sums: dict = field(default_factory=dict)
    draw_heights: np.ndarray | None = None
    width: np.ndarray | None = None
    drawn_length: int = 0


def tree_stats(tree: CladeTree, powers=(0.5, 1.0, 2.0)) -> TreeStats:
    hops = leaf_hops(tree)
    heights = leaf_heights(tree) if tree.timed else None
    ext = hop_extremes(tree)
    W, drawn = width_profile(tree)
    return TreeStats(
        leaf_heights=heights,
        leaf_hops=hops,
        max_height=float(heights.max()) if heights is not None else None,
        total_length=total_length(tree) if tree.timed else None,
        mean_hops=float(hops.mean()),
        max_hops=ext.max_hops,
        greedy_hops=ext.greedy_hops,
        greedy_ties=ext.greedy_ties,
        power_sums={p: power_sum(tree, p) for p in powers},
        draw_heights=draw_heights(tree),
        width=W,
        drawn_length=drawn,
    )


STATS_CSV_COLUMNS = (
    "rep", "n", "mean_height", "within_var", "max_height", "total_length",
    "mean_hops", "max_hops", "greedy_hops", "drawn_length", "S_half", "S_1", "S_2",
)


def stats_csv_row(rep: int, tree: CladeTree) -> list:
    s = tree_stats(tree)
    h = s.leaf_heights
    return [
        rep, tree.n,
        float(h.mean()) if h is not None else math.nan,
        float(h.var()) if h is not None else math.nan,
        s.max_height if s.max_height is not None else math.nan,
        s.total_length if s.total_length is not None else math.nan,
        s.mean_hops, s.max_hops, s.greedy_hops, s.drawn_length,
        s.power_sums[0.5], s.power_sums[1.0], s.power_sums[2.0],
    ]


# ---------------------------------------------------------------------------
# batch API
# ---------------------------------------------------------------------------

SUMMARY_FIELDS = ("mean_height", "within_var", "max_height", "total_length",
                  "picked_height", "mean_hops", "max_hops", "greedy_hops")


def batch_summary(batch: TreeBatch, rng: np.random.Generator) -> dict:
    """Per-tree summaries; ``picked_height`` is the height of one uniform leaf."""
    reps, nn = batch.size.shape
    n = batch.size[0, 0]
    picks = rng.integers(0, n, reps)
    out = np.zeros((reps, 8))
    _batch_summary(batch.size, batch.left, batch.hold, picks, out)
    return {name: out[:, c] for c, name in enumerate(SUMMARY_FIELDS)}


def batch_branchpoints(batch: TreeBatch, rng: np.random.Generator) -> np.ndarray:
    """Branchpoint height of two uniform distinct leaves, one pair per tree."""
    reps = len(batch)
    n = int(batch.size[0, 0])
    u = rng.integers(0, n, reps)
    v = rng.integers(0, n - 1, reps)
    v = np.where(v >= u, v + 1, v)
    out = np.zeros(reps)
    _batch_branchpoints(batch.size, batch.left, batch.hold, u, v, out)
    return out


def batch_sum_squares(batch: TreeBatch, ts) -> np.ndarray:
    ts = np.asarray(ts, dtype=np.float64)
    out = np.zeros((len(batch), len(ts)))
    _batch_sum_squares(batch.size, batch.left, batch.hold, ts, out)
    return out


def batch_power_sums(batch: TreeBatch, powers) -> np.ndarray:
    powers = np.asarray(powers, dtype=np.float64)
    out = np.zeros((len(batch), len(powers)))
    _batch_power_sums(batch.size, powers, out)
    return out


def sample_branchpoints(n: int, reps: int, rng: np.random.Generator) -> np.ndarray:
    """Branchpoint heights of two distinct uniform leaves of CTCS(n), sampled lazily.

    Only the clade holding both leaves is followed: it waits Exp(h_{m-1}), splits by
    q(m, .), and the pair stays together on the left with probability
    i(i-1)/(m(m-1)) or on the right with probability (m-i)(m-i-1)/(m(m-1)).
    The law is that of ``batch_branchpoints`` on full trees, at O(log n) cost.
    """
    if n < 2:
        raise DomainError("need n >= 2 for two distinct leaves")
    h = harmonic_table(n).h
    m = np.full(reps, n, dtype=np.int64)
    out = np.zeros(reps)
    active = np.arange(reps)
    while active.size:
        mm = m[active]
        out[active] += rng.standard_exponential(active.size) / h[mm - 1]
        j = np.clip(np.searchsorted(h, rng.random(active.size) * h[mm - 1]), 1, mm - 1)
        i = np.where(rng.random(active.size) < 0.5, j, mm - j)
        u = rng.random(active.size) * (mm * (mm - 1))
        both_left = u < i * (i - 1)
        both_right = ~both_left & (u < i * (i - 1) + (mm - i) * (mm - i - 1))
        nxt = np.where(both_left, i, mm - i)
        keep = both_left | both_right
        m[active[keep]] = nxt[keep]
        active = active[keep]
    return out
