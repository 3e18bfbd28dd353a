"""Inductive construction CTCS(k) -> CTCS(k + 1) on bud trees.

One step: pick a uniform bud and walk down from the root towards it. While
inside a clade segment holding m buds a stop happens at rate 1/m per unit
length. A stop inserts a side-bud there (fair coin for the side); reaching the
target without stopping extends it by an Exponential(1) edge ending in a
bud-pair.

The grown tree lives in linked arrays (parent/left/right) so a step only
touches one root path; conversion to preorder happens at the end.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .chain import simulate_paths
from .splitcore import DomainError
from .treemodel import BudTree, CladeTree, sample_batch

SIDE_BUD = 0
BRANCH_EXTENSION = 1
SIDE_LEAF_EXTENSION = 2
KIND_NAMES = ("side_bud", "branch_extension", "side_leaf_extension")


@dataclass(frozen=True)
class GrowthRecord:
    """What one growth step did.

    ``edge`` is the index of the stopped segment along the root -> target path
    (0 = root segment) and ``offset`` the distance from that segment's start;
    both are None for extensions. ``new_length`` is None for side-buds.
    """

    kind: str
    target: int
    edge: int | None = None
    offset: float | None = None
    side: str | None = None
    new_length: float | None = None


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _step(par, lch, rch, size, hold, leaf_ids, k, nnodes, u_target, e_stop, u_side, e_new, path, rec):
    """Apply one growth step in place; returns the new node count.

    rec <- (kind, target position, edge index, offset, side, new length)
    """
    idx = int(u_target * k)
    if idx >= k:
        idx = k - 1
    x = leaf_ids[idx]
    depth = 0
    v = x
    while par[v] >= 0:
        v = par[v]
        path[depth] = v
        depth += 1
    # path[depth-1] is the root; walk it top-down
    pos = 0
    for d in range(depth - 1, -1, -1):
        v = path[d]
        child = x if d == 0 else path[d - 1]
        if rch[v] == child:
            pos += size[lch[v]]
    rec[1] = pos
    clock = e_stop
    for d in range(depth - 1, -1, -1):
        v = path[d]
        cost = hold[v] / size[v]
        if clock < cost:
            alpha = clock * size[v]
            w = nnodes
            b = nnodes + 1
            nnodes += 2
            p = par[v]
            size[w] = size[v] + 1
            hold[w] = alpha
            hold[v] -= alpha
            par[w] = p
            if p >= 0:
                if lch[p] == v:
                    lch[p] = w
                else:
                    rch[p] = w
            par[v] = w
            par[b] = w
            size[b] = 1
            hold[b] = np.nan
            lch[b] = -1
            rch[b] = -1
            if u_side < 0.5:
                lch[w] = b
                rch[w] = v
                rec[4] = 0.0
            else:
                lch[w] = v
                rch[w] = b
                rec[4] = 1.0
            leaf_ids[k] = b
            q = p
            while q >= 0:
                size[q] += 1
                q = par[q]
            rec[0] = 0.0
            rec[2] = depth - 1 - d
            rec[3] = alpha
            rec[5] = np.nan
            return nnodes
        clock -= cost
    # extension of the target bud
    p = par[x]
    rec[0] = 1.0 if size[p] == 2 else 2.0
    c1 = nnodes
    c2 = nnodes + 1
    nnodes += 2
    size[x] = 2
    hold[x] = e_new
    lch[x] = c1
    rch[x] = c2
    for c in (c1, c2):
        par[c] = x
        size[c] = 1
        hold[c] = np.nan
        lch[c] = -1
        rch[c] = -1
    leaf_ids[idx] = c1
    leaf_ids[k] = c2
    q = p
    while q >= 0:
        size[q] += 1
        q = par[q]
    rec[2] = -1.0
    rec[3] = np.nan
    rec[4] = np.nan
    rec[5] = e_new
    return nnodes


@numba.njit(cache=True)
def _to_preorder(lch, rch, size, hold, root, osize, oleft, ohold):
    stack = np.empty(osize.shape[0], dtype=np.int64)
    top = 0
    stack[0] = root
    top = 1
    out = 0
    while top > 0:
        top -= 1
        v = stack[top]
        osize[out] = size[v]
        if size[v] >= 2:
            oleft[out] = size[lch[v]]
            ohold[out] = hold[v]
            stack[top] = rch[v]
            stack[top + 1] = lch[v]
            top += 2
        else:
            oleft[out] = 0
            ohold[out] = np.nan
        out += 1


@numba.njit(cache=True)
def _from_preorder(size_in, left_in, hold_in, par, lch, rch, size, hold, leaf_ids):
    """Load a preorder tree into linked arrays (node ids = preorder indices)."""
    nn = size_in.shape[0]
    nleaf = 0
    for i in range(nn):
        size[i] = size_in[i]
        hold[i] = hold_in[i]
        if size_in[i] >= 2:
            li = i + 1
            ri = i + 2 * left_in[i]
            lch[i] = li
            rch[i] = ri
            par[li] = i
            par[ri] = i
        else:
            lch[i] = -1
            rch[i] = -1
            leaf_ids[nleaf] = i
            nleaf += 1
    par[0] = -1
    return nn


@numba.njit(cache=True)
def _grow_run(k0, nnodes, par, lch, rch, size, hold, leaf_ids, u_target, e_stop, u_side, e_new, records):
    steps = u_target.shape[0]
    path = np.empty(par.shape[0], dtype=np.int64)
    k = k0
    for s in range(steps):
        nnodes = _step(par, lch, rch, size, hold, leaf_ids, k, nnodes,
                       u_target[s], e_stop[s], u_side[s], e_new[s], path, records[s])
        k += 1
    return nnodes


@numba.njit(cache=True)
def _grow_batch_shapes(n, root_hold, u_target, e_stop, u_side, e_new, shapes, heights_mean):
    """Grow ``reps`` trees from CTCS(2) to n; store preorder left sizes and mean leaf height."""
    reps = root_hold.shape[0]
    cap = 2 * n + 2
    par = np.empty(cap, dtype=np.int64)
    lch = np.empty(cap, dtype=np.int64)
    rch = np.empty(cap, dtype=np.int64)
    size = np.empty(cap, dtype=np.int64)
    hold = np.empty(cap)
    leaf_ids = np.empty(n + 1, dtype=np.int64)
    osize = np.empty(2 * n - 1, dtype=np.int64)
    oleft = np.empty(2 * n - 1, dtype=np.int64)
    ohold = np.empty(2 * n - 1)
    records = np.empty((n, 6))
    for r in range(reps):
        _init_pair(par, lch, rch, size, hold, leaf_ids, root_hold[r])
        _grow_run(2, 3, par, lch, rch, size, hold, leaf_ids,
                  u_target[r], e_stop[r], u_side[r], e_new[r], records)
        _to_preorder(lch, rch, size, hold, _root(par, leaf_ids[0]), osize, oleft, ohold)
        j = 0
        birth = np.zeros(2 * n - 1)
        tot = 0.0
        for i in range(2 * n - 1):
            if osize[i] >= 2:
                shapes[r, j] = oleft[i]
                j += 1
                b = birth[i] + ohold[i]
                birth[i + 1] = b
                birth[i + 2 * oleft[i]] = b
            else:
                tot += birth[i]
        heights_mean[r] = tot / n


@numba.njit(cache=True)
def _init_pair(par, lch, rch, size, hold, leaf_ids, root_hold):
    par[0] = -1
    lch[0] = 1
    rch[0] = 2
    size[0] = 2
    hold[0] = root_hold
    for c in (1, 2):
        par[c] = 0
        lch[c] = -1
        rch[c] = -1
        size[c] = 1
        hold[c] = np.nan
    leaf_ids[0] = 1
    leaf_ids[1] = 2


@numba.njit(cache=True)
def _root(par, v):
    while par[v] >= 0:
        v = par[v]
    return v


# ---------------------------------------------------------------------------
# Python API
# ---------------------------------------------------------------------------


class _Linked:
    def __init__(self, cap: int, n_leaves: int):
        self.par = np.empty(cap, dtype=np.int64)
        self.lch = np.empty(cap, dtype=np.int64)
        self.rch = np.empty(cap, dtype=np.int64)
        self.size = np.empty(cap, dtype=np.int64)
        self.hold = np.empty(cap)
        self.leaf_ids = np.empty(n_leaves, dtype=np.int64)

    def to_clade_tree(self, k: int) -> CladeTree:
        osize = np.empty(2 * k - 1, dtype=np.int64)
        oleft = np.empty(2 * k - 1, dtype=np.int64)
        ohold = np.empty(2 * k - 1)
        root = _root(self.par, self.leaf_ids[0])
        _to_preorder(self.lch, self.rch, self.size, self.hold, root, osize, oleft, ohold)
        return CladeTree(osize, oleft, ohold)


def _draws(rng: np.random.Generator, steps: int):
    return (rng.random(steps), rng.standard_exponential(steps), rng.random(steps), rng.standard_exponential(steps))


def _record(row: np.ndarray) -> GrowthRecord:
    kind = KIND_NAMES[int(row[0])]
    if kind == "side_bud":
        return GrowthRecord(kind, int(row[1]), int(row[2]), float(row[3]), "left" if row[4] == 0 else "right")
    return GrowthRecord(kind, int(row[1]), new_length=float(row[5]))


def grow_step(tree: BudTree, rng: np.random.Generator) -> tuple[BudTree, GrowthRecord]:
    """Add one bud to ``tree`` by the inductive rule."""
    if not isinstance(tree, BudTree):
        tree = BudTree(tree)
    k = tree.bud_count
    if k < 2:
        raise DomainError("growth needs at least two buds")
    t = tree.tree
    lk = _Linked(2 * k + 1, k + 1)
    nn = _from_preorder(t.size, t.left, t.hold, lk.par, lk.lch, lk.rch, lk.size, lk.hold, lk.leaf_ids)
    records = np.empty((1, 6))
    _grow_run(k, nn, lk.par, lk.lch, lk.rch, lk.size, lk.hold, lk.leaf_ids, *_draws(rng, 1), records)
    return BudTree(lk.to_clade_tree(k + 1)), _record(records[0])


def grow(n: int, rng: np.random.Generator, trace: bool = False):
    """CTCS(n) by growth from CTCS(2); with ``trace`` also the list of GrowthRecords."""
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise DomainError("n must be an integer >= 2")
    root_hold = float(rng.standard_exponential())
    lk = _Linked(2 * n + 1, n + 1)
    _init_pair(lk.par, lk.lch, lk.rch, lk.size, lk.hold, lk.leaf_ids, root_hold)
    records = np.empty((max(n - 2, 0), 6))
    if n > 2:
        _grow_run(2, 3, lk.par, lk.lch, lk.rch, lk.size, lk.hold, lk.leaf_ids, *_draws(rng, n - 2), records)
    bud = BudTree(lk.to_clade_tree(n))
    if trace:
        return bud, [_record(r) for r in records]
    return bud


def grow_batch(n: int, reps: int, rng: np.random.Generator):
    """Grow ``reps`` trees to n; returns (preorder left-size keys, mean leaf height per tree)."""
    if n < 2:
        raise DomainError("n must be >= 2")
    root_hold = rng.standard_exponential(reps)
    steps = n - 2
    u_t = rng.random((reps, steps))
    e_s = rng.standard_exponential((reps, steps))
    u_s = rng.random((reps, steps))
    e_n = rng.standard_exponential((reps, steps))
    shapes = np.zeros((reps, n - 1), dtype=np.int64)
    means = np.zeros(reps)
    _grow_batch_shapes(n, root_hold, u_t, e_s, u_s, e_n, shapes, means)
    return shapes, means


def records_to_csv(records) -> str:
    lines = ["step,buds_before,kind,target,edge,offset,side,new_length"]
    for s, r in enumerate(records):
        vals = [r.edge, r.offset, r.side, r.new_length]
        txt = ["" if v is None else (format(v, ".17g") if isinstance(v, float) else str(v)) for v in vals]
        lines.append(f"{s},{s + 2},{r.kind},{r.target}," + ",".join(txt))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# transition-kind frequencies
# ---------------------------------------------------------------------------


@dataclass
class KindFrequencies:
    n: int
    reps: int
    counts: np.ndarray  # side_bud, branch_extension, side_leaf_extension

    @property
    def freqs(self) -> np.ndarray:
        return self.counts / self.reps

    def _se(self, p):
        return math.sqrt(max(p * (1 - p), 0.0) / self.reps)

    @property
    def p_side(self) -> float:
        return float(self.freqs[SIDE_BUD])

    @property
    def p_up(self) -> float:
        return float(self.freqs[BRANCH_EXTENSION])

    @property
    def p_ext(self) -> float:
        return float(self.freqs[SIDE_LEAF_EXTENSION])

    @property
    def length_increase(self) -> tuple[float, float]:
        p = self.p_up + self.p_ext
        return p, self._se(p)

    @property
    def pair_increase(self) -> tuple[float, float]:
        """2 * p_ext: expected growth in the number of buds sitting in pairs."""
        return 2 * self.p_ext, 2 * self._se(self.p_ext)

    def stderr(self) -> np.ndarray:
        return np.array([self._se(p) for p in self.freqs])


def kind_frequencies(n: int, reps: int, rng: np.random.Generator, method: str = "chain") -> KindFrequencies:
    """Frequencies of the three step kinds at k = n -> n + 1.

    ``method="chain"`` samples the root path to the target bud directly: it is the
    size-bias chain from n with its holds, and the step stops on it with
    probability 1 - exp(-sum hold_m / m). ``method="tree"`` samples CTCS(n) and
    runs one growth step on it.
    """
    if n < 3:
        raise DomainError("n must be >= 3")
    counts = np.zeros(3, dtype=np.int64)
    if method == "chain":
        paths = simulate_paths(n, reps, rng)
        stop = rng.standard_exponential(reps) < paths.clock
        counts[SIDE_BUD] = stop.sum()
        counts[BRANCH_EXTENSION] = (~stop & (paths.penultimate == 2)).sum()
        counts[SIDE_LEAF_EXTENSION] = (~stop & (paths.penultimate > 2)).sum()
    elif method == "tree":
        batch = sample_batch(n, reps, rng)
        kinds = _one_step_kinds(batch.size, batch.left, batch.hold, *_draws(rng, reps))
        counts[:] = np.bincount(kinds, minlength=3)
    else:
        raise DomainError(f"unknown method {method!r}")
    return KindFrequencies(n, reps, counts)


@numba.njit(cache=True)
def _one_step_kinds(size_b, left_b, hold_b, u_t, e_s, u_s, e_n):
    reps, nn = size_b.shape
    k = size_b[0, 0]
    cap = nn + 2
    par = np.empty(cap, dtype=np.int64)
    lch = np.empty(cap, dtype=np.int64)
    rch = np.empty(cap, dtype=np.int64)
    size = np.empty(cap, dtype=np.int64)
    hold = np.empty(cap)
    leaf_ids = np.empty(k + 1, dtype=np.int64)
    path = np.empty(cap, dtype=np.int64)
    rec = np.empty(6)
    kinds = np.empty(reps, dtype=np.int64)
    for r in range(reps):
        nnodes = _from_preorder(size_b[r], left_b[r], hold_b[r], par, lch, rch, size, hold, leaf_ids)
        _step(par, lch, rch, size, hold, leaf_ids, k, nnodes, u_t[r], e_s[r], u_s[r], e_n[r], path, rec)
        kinds[r] = int(rec[0])
    return kinds


# ---------------------------------------------------------------------------
# closed-form oracle for k = 3 -> 4
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ctcs4Oracle:
    """Conditional law of CTCS(4) given CTCS(3) with root edge a and top edge b.

    Shapes: t1 side-bud on the root edge; t2 the side-bud extended; t3 side-bud
    on the top edge; t4 a pair bud extended. Each includes its mirror image.
    """

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise DomainError("edge lengths must be positive")

    @property
    def probabilities(self) -> tuple[float, float, float, float]:
        ea = math.exp(-self.a / 3)
        eb = math.exp(-self.b / 2)
        return (-math.expm1(-self.a / 3), ea / 3, 2 / 3 * ea * -math.expm1(-self.b / 2), 2 / 3 * ea * eb)

    def density(self, shape: int, c: float) -> float:
        """g_i(c | a, b): joint density of shape i and the new edge length c."""
        a, b = self.a, self.b
        if c < 0:
            return 0.0
        if shape == 1:
            return math.exp(-c / 3) / 3 if c < a else 0.0
        if shape == 2:
            return math.exp(-a / 3) * math.exp(-c) / 3
        if shape == 3:
            return math.exp(-a / 3) * math.exp(-c / 2) / 3 if c < b else 0.0
        if shape == 4:
            return 2 / 3 * math.exp(-a / 3) * math.exp(-b / 2) * math.exp(-c)
        raise DomainError("shape must be 1..4")


def ctcs4_oracle(a: float, b: float) -> Ctcs4Oracle:
    return Ctcs4Oracle(a, b)
