"""Clade trees in preorder-array form, DTCS/CTCS samplers, spanning and pruned trees.

Layout: a tree on n leaves has 2n - 1 nodes stored in preorder. Node i has
``size[i]`` leaves; if internal, its left child is i + 1 and its right child is
i + 2 * left[i]. Leaves are numbered 0..n-1 by their interval position, which is
also the order in which they appear in the preorder scan. ``hold[i]`` is the
time a clade of size >= 2 waits before splitting (NaN on leaves and untimed trees).

The pruned (bud) representation of a CTCS tree is the same structure read
differently: a split with a singleton child is a side-bud on the edge, a size-2
clade is an edge ending in a bud-pair, and each internal clade is one edge
segment, giving k - 1 segments for k buds.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numba
import numpy as np

from .splitcore import DomainError, harmonic_table, split_pmf

# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _fill_tree(n, h, u_pick, u_flip, expo, timed, size, left, hold):
    size[0] = n
    k = 0
    for i in range(2 * n - 1):
        m = size[i]
        if m >= 2:
            j = np.searchsorted(h, u_pick[k] * h[m - 1])
            if j < 1:
                j = 1
            elif j > m - 1:
                j = m - 1
            lsz = m - j if u_flip[k] < 0.5 else j
            left[i] = lsz
            size[i + 1] = lsz
            size[i + 2 * lsz] = m - lsz
            if timed:
                hold[i] = expo[k] / h[m - 1]
            else:
                hold[i] = np.nan
            k += 1
        else:
            left[i] = 0
            hold[i] = np.nan


@numba.njit(cache=True)
def _fill_batch(n, h, u_pick, u_flip, expo, timed, size, left, hold):
    for r in range(size.shape[0]):
        _fill_tree(n, h, u_pick[r], u_flip[r], expo[r], timed, size[r], left[r], hold[r])


@numba.njit(cache=True)
def _birth_heights(size, left, hold):
    """Height at which each clade comes into existence."""
    nn = size.shape[0]
    birth = np.zeros(nn)
    for i in range(nn):
        if size[i] >= 2:
            b = birth[i] + hold[i]
            birth[i + 1] = b
            birth[i + 2 * left[i]] = b
    return birth


@numba.njit(cache=True)
def _leaf_starts(size, left):
    """Position of the leftmost leaf of each clade."""
    nn = size.shape[0]
    lo = np.zeros(nn, dtype=np.int64)
    for i in range(nn):
        if size[i] >= 2:
            lo[i + 1] = lo[i]
            lo[i + 2 * left[i]] = lo[i] + left[i]
    return lo


@numba.njit(cache=True)
def _parents(size, left):
    nn = size.shape[0]
    par = np.full(nn, -1, dtype=np.int64)
    for i in range(nn):
        if size[i] >= 2:
            par[i + 1] = i
            par[i + 2 * left[i]] = i
    return par


@numba.njit(cache=True)
def _induce(size, left, hold, cnt, par):
    """Induced clade tree on the selected leaves (counts ``cnt`` per node).

    Returns induced (size, left, hold) and, per induced leaf, the original node
    at which that leaf's clade became alone among the selected leaves.
    """
    nn = size.shape[0]
    k = cnt[0]
    osize = np.zeros(2 * k - 1, dtype=np.int64)
    oleft = np.zeros(2 * k - 1, dtype=np.int64)
    ohold = np.full(2 * k - 1, np.nan)
    oleaf_node = np.zeros(k, dtype=np.int64)
    carry = np.zeros(nn)
    out = 0
    nleaf = 0
    for i in range(nn):
        c = cnt[i]
        if c == 0:
            continue
        if c == 1:
            if i == 0 or cnt[par[i]] >= 2:
                osize[out] = 1
                oleft[out] = 0
                oleaf_node[nleaf] = i
                nleaf += 1
                out += 1
            continue
        li = i + 1
        ri = i + 2 * left[i]
        acc = carry[i] + hold[i]
        if cnt[li] >= 1 and cnt[ri] >= 1:
            osize[out] = c
            oleft[out] = cnt[li]
            ohold[out] = acc
            out += 1
        elif cnt[li] >= 1:
            carry[li] = acc
        else:
            carry[ri] = acc
    return osize, oleft, ohold, oleaf_node


# ---------------------------------------------------------------------------
# data model
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CladeTree:
    """Binary split tree on ``n`` leaves in preorder arrays."""

    size: np.ndarray
    left: np.ndarray
    hold: np.ndarray

    def __post_init__(self):
        size, left = self.size, self.left
        if size.ndim != 1 or len(size) != 2 * int(size[0]) - 1:
            raise DomainError("preorder arrays must have 2n - 1 entries")
        if len(left) != len(size) or len(self.hold) != len(size):
            raise DomainError("size, left and hold must have equal length")
        internal = np.flatnonzero(size >= 2)
        idx = np.arange(len(size))
        if np.any(left[internal] < 1) or np.any(left[internal] >= size[internal]):
            raise DomainError("left sizes out of range")
        r = internal + 2 * left[internal]
        if np.any(size[internal + 1] != left[internal]) or np.any(size[r] != size[internal] - left[internal]):
            raise DomainError("child sizes do not add up")
        if np.any(size[idx[size < 2]] != 1):
            raise DomainError("leaf sizes must be 1")
        timed = ~np.isnan(self.hold[internal])
        if timed.any() and not timed.all():
            raise DomainError("hold times must be present on every internal node or none")
        if timed.any() and np.any(self.hold[internal] < 0):
            raise DomainError("hold times must be nonnegative")

    # -- basic views -------------------------------------------------------

    @property
    def n(self) -> int:
        return int(self.size[0])

    @property
    def timed(self) -> bool:
        return self.n >= 2 and not math.isnan(self.hold[0])

    @property
    def internal(self) -> np.ndarray:
        return np.flatnonzero(self.size >= 2)

    @property
    def leaf_nodes(self) -> np.ndarray:
        """Node index of each leaf, in position order."""
        return np.flatnonzero(self.size == 1)

    def children(self, i: int) -> tuple[int, int]:
        if self.size[i] < 2:
            raise DomainError(f"node {i} is a leaf")
        return i + 1, i + 2 * int(self.left[i])

    def leaf_starts(self) -> np.ndarray:
        return _leaf_starts(self.size, self.left)

    def parents(self) -> np.ndarray:
        return _parents(self.size, self.left)

    def birth_heights(self) -> np.ndarray:
        self._require_times()
        return _birth_heights(self.size, self.left, self.hold)

    def shape_key(self) -> tuple:
        """Left sizes of internal nodes in preorder; identifies the ordered shape."""
        return tuple(int(x) for x in self.left[self.internal])

    def untimed(self) -> "CladeTree":
        return CladeTree(self.size, self.left, np.full(len(self.size), np.nan))

    def _require_times(self):
        if self.n >= 2 and not self.timed:
            raise DomainError("operation needs a timed (CTCS) tree")

    def __eq__(self, other):
        if not isinstance(other, CladeTree):
            return NotImplemented
        return (
            np.array_equal(self.size, other.size)
            and np.array_equal(self.left, other.left)
            and np.allclose(self.hold, other.hold, rtol=1e-12, atol=0, equal_nan=True)
        )

    def __repr__(self):
        kind = "CTCS" if self.timed else "DTCS"
        return f"CladeTree({kind}, n={self.n})"

    # -- serialisation -----------------------------------------------------

    def to_csv(self) -> str:
        """Preorder records ``size,left_size,hold_time``; empty hold on leaves/untimed."""
        buf = io.StringIO()
        buf.write("size,left_size,hold_time\n")
        for s, l, t in zip(self.size.tolist(), self.left.tolist(), self.hold.tolist()):
            buf.write(f"{s},{l},{'' if math.isnan(t) else format(t, '.17g')}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CladeTree":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if lines and lines[0].startswith("size"):
            lines = lines[1:]
        size, left, hold = [], [], []
        for ln in lines:
            s, l, t = ln.split(",")
            size.append(int(s))
            left.append(int(l))
            hold.append(float(t) if t else math.nan)
        return cls(np.array(size, dtype=np.int64), np.array(left, dtype=np.int64), np.array(hold))

    def to_newick(self, names=None) -> str:
        """Newick text; leaf ``p`` is named ``names[p]`` (default ``L{p+1}``).

        A clade's branch length is its hold time, so the root carries a length too.
        """
        timed = self.timed
        if names is None:
            names = [f"L{p + 1}" for p in range(self.n)]
        out = []
        leaf = 0
        # iterative preorder emission: stack of (node, state)
        stack = [(0, 0)]
        while stack:
            i, state = stack.pop()
            if self.size[i] == 1:
                out.append(names[leaf])
                leaf += 1
                continue
            li, ri = i + 1, i + 2 * int(self.left[i])
            if state == 0:
                out.append("(")
                stack.append((i, 1))
                stack.append((li, 0))
            elif state == 1:
                out.append(",")
                stack.append((i, 2))
                stack.append((ri, 0))
            else:
                out.append(")")
                if timed:
                    out.append(":" + format(float(self.hold[i]), ".17g"))
        return "".join(out) + ";"


def tree_from_nested(spec, holds=None) -> CladeTree:
    """Build a tree from nested 2-tuples, e.g. ``((0, 0), 0)``; any non-tuple is a leaf.

    ``holds`` optionally lists hold times for internal nodes in preorder.
    """
    size, left = [], []

    def walk(node):
        if not isinstance(node, tuple):
            size.append(1)
            left.append(0)
            return 1
        idx = len(size)
        size.append(0)
        left.append(0)
        a = walk(node[0])
        b = walk(node[1])
        size[idx] = a + b
        left[idx] = a
        return a + b

    walk(spec)
    size_a = np.array(size, dtype=np.int64)
    hold = np.full(len(size), np.nan)
    if holds is not None:
        hold[size_a >= 2] = holds
    return CladeTree(size_a, np.array(left, dtype=np.int64), hold)


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------


def _check_size(n: int) -> np.ndarray:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    return harmonic_table(n).h


def _sample(n: int, rng: np.random.Generator, timed: bool) -> CladeTree:
    h = _check_size(n)
    u_pick = rng.random(n - 1)
    u_flip = rng.random(n - 1)
    expo = rng.standard_exponential(n - 1) if timed else np.empty(0)
    size = np.zeros(2 * n - 1, dtype=np.int64)
    left = np.zeros(2 * n - 1, dtype=np.int64)
    hold = np.full(2 * n - 1, np.nan)
    if n >= 2:
        _fill_tree(n, h, u_pick, u_flip, expo, timed, size, left, hold)
    else:
        size[0] = 1
    return CladeTree(size, left, hold)


def sample_dtcs(n: int, rng: np.random.Generator) -> CladeTree:
    """Discrete-time critical splitting tree on ``n`` leaves (no hold times)."""
    return _sample(n, rng, timed=False)


def sample_ctcs(n: int, rng: np.random.Generator) -> CladeTree:
    """Continuous-time tree: a size-m clade holds Exponential(h_{m-1}) before splitting."""
    return _sample(n, rng, timed=True)


@dataclass
class TreeBatch:
    """``reps`` trees of equal size stored row-wise."""

    size: np.ndarray
    left: np.ndarray
    hold: np.ndarray

    def __len__(self):
        return self.size.shape[0]

    def __getitem__(self, r) -> CladeTree:
        return CladeTree(self.size[r], self.left[r], self.hold[r])


def sample_batch(n: int, reps: int, rng: np.random.Generator, timed: bool = True) -> TreeBatch:
    """Draw ``reps`` independent trees at once (one block of random numbers)."""
    h = _check_size(n)
    if n < 2:
        raise DomainError("batch sampling needs n >= 2")
    u_pick = rng.random((reps, n - 1))
    u_flip = rng.random((reps, n - 1))
    expo = rng.standard_exponential((reps, n - 1)) if timed else np.empty((reps, 0))
    size = np.zeros((reps, 2 * n - 1), dtype=np.int64)
    left = np.zeros((reps, 2 * n - 1), dtype=np.int64)
    hold = np.full((reps, 2 * n - 1), np.nan)
    _fill_batch(n, h, u_pick, u_flip, expo, timed, size, left, hold)
    return TreeBatch(size, left, hold)


# ---------------------------------------------------------------------------
# spanning and pruned trees
# ---------------------------------------------------------------------------


def _selection_counts(tree: CladeTree, leaves) -> np.ndarray:
    leaves = np.asarray(sorted(set(int(x) for x in leaves)), dtype=np.int64)
    if len(leaves) == 0:
        raise DomainError("need at least one leaf")
    if leaves[0] < 0 or leaves[-1] >= tree.n:
        raise DomainError(f"leaf positions must lie in [0, {tree.n - 1}]")
    marks = np.zeros(tree.n + 1, dtype=np.int64)
    marks[leaves + 1] = 1
    prefix = np.cumsum(marks)
    lo = tree.leaf_starts()
    return prefix[lo + tree.size] - prefix[lo]


@dataclass(frozen=True)
class SpanningTree:
    """Pruned tree on the selected leaves plus each leaf's terminal branch.

    ``terminal[j]`` is the time from the moment the j-th selected leaf (in
    position order) is alone among the selection until it becomes a singleton.
    """

    pruned: CladeTree
    leaves: tuple
    terminal: np.ndarray

    @property
    def leaf_heights(self) -> np.ndarray:
        if self.pruned.n == 1:
            return self.terminal.copy()
        birth = self.pruned.birth_heights()
        return birth[self.pruned.leaf_nodes] + self.terminal


def _induced(tree: CladeTree, leaves):
    tree._require_times()
    cnt = _selection_counts(tree, leaves)
    size, left, hold, leaf_node = _induce(tree.size, tree.left, tree.hold, cnt, tree.parents())
    return CladeTree(size, left, hold), leaf_node


def spanning_tree(tree: CladeTree, leaves) -> SpanningTree:
    """Induced split history of ``leaves``, each followed to its singleton time."""
    pruned, leaf_node = _induced(tree, leaves)
    birth = tree.birth_heights()
    sel = sorted(set(int(x) for x in leaves))
    leaf_height = birth[tree.leaf_nodes[sel]]
    return SpanningTree(pruned, tuple(sel), leaf_height - birth[leaf_node])


def prune(tree, leaves) -> "BudTree":
    """PRU: cut each selected leaf's branch back to where it left the others.

    ``tree`` may be a CladeTree or a SpanningTree (pruning a spanning tree just
    drops its terminal branches).
    """
    if isinstance(tree, SpanningTree):
        if set(int(x) for x in leaves) != set(tree.leaves):
            sub = [tree.leaves.index(int(x)) for x in leaves]
            return prune(tree.pruned, sub)
        return BudTree(tree.pruned)
    sel = set(int(x) for x in leaves)
    if len(sel) < 2:
        raise DomainError("pruning needs at least two leaves")
    pruned, _ = _induced(tree, sel)
    return BudTree(pruned)


def delete_leaf(tree: CladeTree, leaf: int) -> "BudTree":
    """Delete one bud and prune: PRU(n, n-1) for a chosen leaf."""
    if not 0 <= leaf < tree.n:
        raise DomainError(f"leaf {leaf} out of range")
    return prune(tree, [p for p in range(tree.n) if p != leaf])


@numba.njit(cache=True)
def _delete_batch(size, left, hold, dels, osize, oleft, ohold):
    reps, nn = size.shape
    for r in range(reps):
        sz = size[r]
        lf = left[r]
        lo = _leaf_starts(sz, lf)
        par = _parents(sz, lf)
        d = dels[r]
        cnt = sz.copy()
        for i in range(nn):
            if lo[i] <= d < lo[i] + sz[i]:
                cnt[i] -= 1
        a, b, c, _ = _induce(sz, lf, hold[r], cnt, par)
        osize[r] = a
        oleft[r] = b
        ohold[r] = c


def delete_leaf_batch(batch: "TreeBatch", leaves) -> "TreeBatch":
    """Row-wise ``delete_leaf``: drop leaf ``leaves[r]`` from tree r and prune."""
    reps, nn = batch.size.shape
    n = (nn + 1) // 2
    if n < 3:
        raise DomainError("deleting a leaf needs n >= 3 so that two buds remain")
    leaves = np.asarray(leaves, dtype=np.int64)
    if leaves.shape != (reps,) or np.any((leaves < 0) | (leaves >= n)):
        raise DomainError("one in-range leaf position per tree is required")
    if np.all(np.isnan(batch.hold[:, 0])):
        raise DomainError("pruning needs a timed (CTCS) batch")
    m = 2 * (n - 1) - 1
    osize = np.zeros((reps, m), dtype=np.int64)
    oleft = np.zeros((reps, m), dtype=np.int64)
    ohold = np.zeros((reps, m))
    _delete_batch(batch.size, batch.left, batch.hold, leaves, osize, oleft, ohold)
    return TreeBatch(osize, oleft, ohold)


def clades_at(tree: CladeTree, t: float) -> np.ndarray:
    """Sizes of the clades alive at height ``t`` (sum to n), in position order."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    if tree.n == 1:
        return np.array([1])
    birth = tree.birth_heights()
    leaf = tree.size == 1
    alive = (birth <= t) & (leaf | (birth + np.nan_to_num(tree.hold) > t))
    return tree.size[alive].copy()


# ---------------------------------------------------------------------------
# bud representation
# ---------------------------------------------------------------------------


@dataclass
class Edge:
    """Maximal edge of a bud tree.

    ``side_buds`` holds (offset from the edge's start, 'left' | 'right').
    ``children`` is empty when the edge ends in a bud-pair.
    """

    length: float
    side_buds: list = field(default_factory=list)
    children: list = field(default_factory=list)
    clade: int = 0

    @property
    def ends_in_pair(self) -> bool:
        return not self.children


class BudTree:
    """Pruned representation of a timed clade tree with k >= 2 buds."""

    def __init__(self, tree: CladeTree):
        if tree.n < 2:
            raise DomainError("a bud tree has at least two buds")
        tree._require_times()
        self.tree = tree

    @property
    def bud_count(self) -> int:
        return self.tree.n

    @property
    def segment_count(self) -> int:
        """Edges when side-buds subdivide edges: always k - 1."""
        return len(self.tree.internal)

    @property
    def total_length(self) -> float:
        return float(self.tree.hold[self.tree.internal].sum())

    def shape_key(self) -> tuple:
        return self.tree.shape_key()

    def root_edge(self) -> Edge:
        """Edge view: side-bud offsets and sides along each maximal edge."""
        t = self.tree

        def build(i: int) -> Edge:
            edge = Edge(length=0.0, clade=i)
            while True:
                edge.length += float(t.hold[i])
                li, ri = t.children(i)
                ls, rs = int(t.size[li]), int(t.size[ri])
                if ls == 1 and rs == 1:
                    return edge
                if ls == 1 or rs == 1:
                    edge.side_buds.append((edge.length, "left" if ls == 1 else "right"))
                    i = ri if ls == 1 else li
                    continue
                edge.children = [build(li), build(ri)]
                return edge

        return build(0)

    def edges(self) -> list:
        out, stack = [], [self.root_edge()]
        while stack:
            e = stack.pop()
            out.append(e)
            stack.extend(reversed(e.children))
        return out

    def __eq__(self, other):
        if not isinstance(other, BudTree):
            return NotImplemented
        return self.tree == other.tree

    def __repr__(self):
        return f"BudTree(k={self.bud_count}, length={self.total_length:.4g})"


def shape_pmf(n: int) -> dict:
    """Exact law of the ordered shape (``CladeTree.shape_key``) of DTCS(n).

    The number of ordered shapes grows like the Catalan numbers, so this is
    meant for small n (n <= 10 enumerates 4862 shapes).
    """
    if not 1 <= n <= 12:
        raise DomainError("exact shape enumeration is limited to 1 <= n <= 12")
    return dict(_shape_pmf(n))


@lru_cache(maxsize=None)
def _shape_pmf(n: int) -> tuple:
    if n == 1:
        return (((), 1.0),)
    out = []
    for i in range(1, n):
        q = split_pmf(n, i)
        for lk, lp in _shape_pmf(i):
            for rk, rp in _shape_pmf(n - i):
                out.append(((i,) + lk + rk, q * lp * rp))
    return tuple(out)
