"""Newick parsing and serialization, split statistics of real cladograms, and a
descriptive comparison against DTCS(n) simulations.

Grammar::

    tree    := subtree ';'
    subtree := leaf | '(' subtree (',' subtree)+ ')' label?
    leaf    := label            (a leaf must carry a name)
    label   := name? (':' decimal)?
    name    := [A-Za-z0-9_.-]+  |  "'" ( any byte except "'" | "''" )* "'"

Whitespace is insignificant outside quotes and ``[...]`` comments are skipped
wherever whitespace may appear. Input is handled as UTF-8 bytes and every
error reports the byte offset where it was detected. The parser is iterative,
so deep (caterpillar) trees cannot exhaust the Python stack.
"""
from __future__ import annotations

import math
import re
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import gof
from .splitcore import split_pmf
from .treemodel import CladeTree, sample_batch, sample_ctcs, sample_dtcs

_UNQUOTED = frozenset(b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_.-")
_UNQUOTED_RE = re.compile(r"[A-Za-z0-9_.\-]+")
_NUMBER_RE = re.compile(rb"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_NUMBER_CHARS = frozenset(b"0123456789.eE+-")
_WS = frozenset(b" \t\r\n")


class ParseError(ValueError):
    def __init__(self, offset: int, message: str):
        super().__init__(f"byte {offset}: {message}")
        self.offset = offset
        self.message = message


@dataclass(eq=False)
class Node:
    name: str | None = None
    branch_length: float | None = None
    children: list = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(eq=False)
class PhyloTree:
    root: Node

    def preorder(self):
        stack = [self.root]
        while stack:
            v = stack.pop()
            yield v
            stack.extend(reversed(v.children))

    def postorder(self) -> list:
        out = list(self.preorder())
        out.reverse()
        return out

    def leaves(self) -> list:
        return [v for v in self.preorder() if v.is_leaf]

    @property
    def n_leaves(self) -> int:
        return sum(1 for v in self.preorder() if v.is_leaf)

    @property
    def polytomies(self) -> int:
        return sum(1 for v in self.preorder() if len(v.children) > 2)

    @property
    def is_binary(self) -> bool:
        return self.polytomies == 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class _Reader:
    def __init__(self, data: bytes):
        self.b = data
        self.i = 0

    def skip(self) -> None:
        b = self.b
        while self.i < len(b):
            c = b[self.i]
            if c in _WS:
                self.i += 1
            elif c == 0x5B:  # '['
                end = b.find(b"]", self.i + 1)
                if end < 0:
                    raise ParseError(self.i, "unterminated comment")
                self.i = end + 1
            else:
                return

    def peek(self) -> int:
        return self.b[self.i] if self.i < len(self.b) else -1

    def label(self) -> tuple:
        """Optional name and optional branch length at the current position."""
        self.skip()
        name = None
        c = self.peek()
        if c == 0x27:  # quote
            start = self.i
            self.i += 1
            buf = bytearray()
            while True:
                if self.i >= len(self.b):
                    raise ParseError(start, "unterminated quoted name")
                ch = self.b[self.i]
                if ch == 0x27:
                    if self.i + 1 < len(self.b) and self.b[self.i + 1] == 0x27:
                        buf.append(0x27)
                        self.i += 2
                        continue
                    self.i += 1
                    break
                buf.append(ch)
                self.i += 1
            try:
                name = buf.decode("utf-8")
            except UnicodeDecodeError:
                raise ParseError(start, "quoted name is not valid UTF-8") from None
        elif c in _UNQUOTED:
            start = self.i
            while self.i < len(self.b) and self.b[self.i] in _UNQUOTED:
                self.i += 1
            name = self.b[start : self.i].decode("ascii")
        self.skip()
        length = None
        if self.peek() == 0x3A:  # ':'
            self.i += 1
            self.skip()
            start = self.i
            while self.i < len(self.b) and self.b[self.i] in _NUMBER_CHARS:
                self.i += 1
            tok = self.b[start : self.i]
            if not tok or not _NUMBER_RE.fullmatch(tok):
                raise ParseError(start, f"malformed number {tok.decode('ascii', 'replace')!r}")
            length = float(tok)
            if not math.isfinite(length):
                raise ParseError(start, "branch length out of range")
            if length < 0:
                raise ParseError(start, "negative branch length")
        return name, length


def parse(text) -> PhyloTree:
    """Parse one Newick statement (str or bytes) into a PhyloTree."""
    data = text.encode("utf-8") if isinstance(text, str) else bytes(text)
    r = _Reader(data)
    stack: list = []  # (children, offset of '(')
    while True:
        # expecting a subtree
        r.skip()
        c = r.peek()
        if c == 0x28:  # '('
            stack.append(([], r.i))
            r.i += 1
            continue
        start = r.i
        if c == -1:
            raise ParseError(r.i, "unexpected end of input (missing subtree)")
        name, length = r.label()
        if name is None:
            raise ParseError(start, "empty subtree" if c in (0x2C, 0x29, 0x3B, 0x3A) else f"unexpected byte {chr(c)!r}")
        node = Node(name, length)
        # node complete: attach it and close as many clades as possible
        while True:
            r.skip()
            c = r.peek()
            if not stack:
                if c == 0x3B:  # ';'
                    r.i += 1
                    r.skip()
                    if r.i != len(data):
                        raise ParseError(r.i, "trailing content after ';'")
                    return PhyloTree(node)
                if c == -1:
                    raise ParseError(r.i, "missing ';'")
                if c == 0x29:
                    raise ParseError(r.i, "unbalanced ')'")
                raise ParseError(r.i, f"expected ';' but found {chr(c)!r}")
            if c == 0x2C:  # ','
                stack[-1][0].append(node)
                r.i += 1
                break
            if c == 0x29:  # ')'
                children, open_at = stack.pop()
                children.append(node)
                if len(children) < 2:
                    raise ParseError(open_at, "a parenthesised clade needs at least two subtrees")
                r.i += 1
                name, length = r.label()
                node = Node(name, length, children)
                continue
            if c == -1:
                raise ParseError(r.i, "unbalanced parentheses: missing ')'")
            raise ParseError(r.i, f"expected ',' or ')' but found {chr(c)!r}")


def parse_file(path: str) -> list:
    """Parse every ';'-terminated statement in a file (outside quotes and comments)."""
    with open(path, "rb") as fh:
        data = fh.read()
    out, start, i, quoted, comment = [], 0, 0, False, False
    while i < len(data):
        c = data[i]
        if quoted:
            if c == 0x27:
                if i + 1 < len(data) and data[i + 1] == 0x27:
                    i += 1
                else:
                    quoted = False
        elif comment:
            comment = c != 0x5D
        elif c == 0x27:
            quoted = True
        elif c == 0x5B:
            comment = True
        elif c == 0x3B:
            out.append(parse(data[start : i + 1]))
            start = i + 1
        i += 1
    if data[start:].strip():
        try:
            parse(data[start:])
        except ParseError as e:
            raise ParseError(start + e.offset, e.message) from None
    return out


# ---------------------------------------------------------------------------
# serializer
# ---------------------------------------------------------------------------


def _name(name: str | None) -> str:
    if not name:
        return ""
    if _UNQUOTED_RE.fullmatch(name):
        return name
    return "'" + name.replace("'", "''") + "'"


def _label(v: Node) -> str:
    s = _name(v.name)
    if v.branch_length is not None:
        bl = float(v.branch_length)
        if not (math.isfinite(bl) and bl >= 0):
            raise ValueError(f"branch length {bl} is not a nonnegative finite number")
        s += ":" + repr(bl)
    return s


def serialize(tree: PhyloTree) -> str:
    parts: list[str] = []
    stack: list = [(tree.root, 0)]
    while stack:
        v, state = stack.pop()
        if v.is_leaf:
            parts.append(_label(v))
            continue
        if state == 0:
            parts.append("(")
        if state < len(v.children):
            if state > 0:
                parts.append(",")
            stack.append((v, state + 1))
            stack.append((v.children[state], 0))
        else:
            parts.append(")" + _label(v))
    return "".join(parts) + ";"


# ---------------------------------------------------------------------------
# isomorphism and conversion
# ---------------------------------------------------------------------------


def _canonical_ids(tree: PhyloTree, table: dict) -> int:
    ids: dict[int, int] = {}
    for v in tree.postorder():
        kids = tuple(sorted(ids[id(c)] for c in v.children))
        key = (v.name, v.branch_length, kids)
        ids[id(v)] = table.setdefault(key, len(table))
    return ids[id(tree.root)]


def isomorphic(a: PhyloTree, b: PhyloTree) -> bool:
    """Equal as unordered rooted trees with identical names and branch lengths."""
    table: dict = {}
    return _canonical_ids(a, table) == _canonical_ids(b, table)


def from_clade_tree(tree: CladeTree, names=None) -> PhyloTree:
    """Leaves are named L1..Ln by position unless ``names`` is given; internal
    branch lengths carry the hold times of timed trees."""
    n = tree.n
    names = names if names is not None else [f"L{p + 1}" for p in range(n)]
    nodes = [None] * len(tree.size)
    leaf_pos = {int(v): p for p, v in enumerate(tree.leaf_nodes)}
    for i in range(len(tree.size) - 1, -1, -1):
        bl = None if not tree.timed or tree.size[i] < 2 else float(tree.hold[i])
        if tree.size[i] < 2:
            nodes[i] = Node(str(names[leaf_pos[i]]), None)
        else:
            li, ri = tree.children(i)
            nodes[i] = Node(None, bl, [nodes[li], nodes[ri]])
    return PhyloTree(nodes[0])


def to_clade_tree(tree: PhyloTree) -> tuple[CladeTree, list]:
    """Binary PhyloTree to a CladeTree plus leaf names in position order.

    Internal branch lengths become hold times when every internal node has one.
    """
    if not tree.is_binary:
        raise ValueError("only binary trees convert to clade trees")
    order = list(tree.preorder())
    size: dict[int, int] = {}
    for v in reversed(order):
        size[id(v)] = 1 if v.is_leaf else sum(size[id(c)] for c in v.children)
    internal = [v for v in order if not v.is_leaf]
    timed = bool(internal) and all(v.branch_length is not None for v in internal)
    s = np.array([size[id(v)] for v in order], dtype=np.int64)
    left = np.array([0 if v.is_leaf else size[id(v.children[0])] for v in order], dtype=np.int64)
    hold = np.array([v.branch_length if (timed and not v.is_leaf) else np.nan for v in order], dtype=np.float64)
    names = [v.name for v in order if v.is_leaf]
    return CladeTree(s, left, hold), names


# ---------------------------------------------------------------------------
# split statistics
# ---------------------------------------------------------------------------


@dataclass
class SplitStats:
    m: np.ndarray  # clade size at each binary split
    smaller: np.ndarray  # min(i, m - i)
    polytomies: int
    bucket_lo: np.ndarray  # bucket [lo, 2 lo)
    bucket_median: np.ndarray
    bucket_count: np.ndarray
    alpha: float  # fitted exponent: median smaller side ~ m^alpha
    draw_height: int
    width: np.ndarray
    leaf_depths: np.ndarray

    @property
    def drawn_length(self) -> int:
        return int(self.width.sum())


def _depths_and_draw(tree: PhyloTree):
    order = list(tree.preorder())
    depth = {id(tree.root): 0}
    for v in order:
        for c in v.children:
            depth[id(c)] = depth[id(v)] + 1
    dh: dict[int, int] = {}
    for v in reversed(order):
        dh[id(v)] = 0 if v.is_leaf else 1 + max(dh[id(c)] for c in v.children)
    top = dh[id(tree.root)]
    diff = np.zeros(top + 2, dtype=np.int64)
    for v in order:
        for c in v.children:
            diff[dh[id(c)]] += 1
            diff[dh[id(v)]] -= 1
    width = np.cumsum(diff)[:top]
    leaf_depths = np.array([depth[id(v)] for v in order if v.is_leaf], dtype=np.int64)
    return top, width, leaf_depths


def split_stats(tree: PhyloTree, min_bucket: int = 1) -> SplitStats:
    """(m, smaller side) at every binary internal node plus the median-scaling fit.

    Polytomies are counted and left out (a warning is issued); buckets are
    [2^k, 2^(k+1)) and the exponent is the slope of log median against log of
    the bucket's geometric centre, over buckets with m >= 4 holding at least
    ``min_bucket`` splits. Buckets are weighted by their split count, since the
    few splits of the largest clades give very noisy medians.
    """
    size: dict[int, int] = {}
    ms, sm = [], []
    poly = 0
    for v in tree.postorder():
        if v.is_leaf:
            size[id(v)] = 1
            continue
        size[id(v)] = sum(size[id(c)] for c in v.children)
        if len(v.children) > 2:
            poly += 1
            continue
        i = size[id(v.children[0])]
        ms.append(size[id(v)])
        sm.append(min(i, size[id(v)] - i))
    if poly:
        warnings.warn(f"{poly} polytomies excluded from split statistics")
    m = np.array(ms, dtype=np.int64)
    s = np.array(sm, dtype=np.int64)
    lo_list, med, cnt = [], [], []
    if m.size:
        k = np.floor(np.log2(m)).astype(np.int64)
        for b in np.unique(k):
            sel = k == b
            lo_list.append(1 << int(b))
            med.append(float(np.median(s[sel])))
            cnt.append(int(sel.sum()))
    lo_arr = np.array(lo_list, dtype=np.int64)
    med_arr = np.array(med)
    cnt_arr = np.array(cnt, dtype=np.int64)
    use = (cnt_arr >= min_bucket) & (lo_arr >= 4) & (med_arr > 0)
    alpha = math.nan
    if use.sum() >= 2:
        x = np.log(lo_arr[use] * math.sqrt(2))
        w = np.sqrt(cnt_arr[use].astype(np.float64))
        alpha = float(np.polyfit(x, np.log(med_arr[use]), 1, w=w)[0])
    top, width, depths = _depths_and_draw(tree)
    return SplitStats(m, s, poly, lo_arr, med_arr, cnt_arr, alpha, top, width, depths)


def split_pit(m: np.ndarray, smaller: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Randomised probability-integral transform of each split under the model.

    Given m, the smaller side s has P(s) = q(m, s) + q(m, m - s) (a single term
    when s = m/2). Splits with m <= 3 carry no information and are dropped.
    Under the model the returned values are iid Uniform(0, 1).
    """
    keep = m >= 4
    out = np.empty(int(keep.sum()))
    cache: dict[int, np.ndarray] = {}
    for k, (mm, ss) in enumerate(zip(m[keep], smaller[keep])):
        mm = int(mm)
        if mm not in cache:
            p = np.array([split_pmf(mm, j) + (split_pmf(mm, mm - j) if 2 * j != mm else 0.0)
                          for j in range(1, mm // 2 + 1)])
            cache[mm] = np.concatenate([[0.0], np.cumsum(p)])
        c = cache[mm]
        out[k] = c[ss - 1] + rng.random() * (c[ss] - c[ss - 1])
    return out


# ---------------------------------------------------------------------------
# comparison against simulations
# ---------------------------------------------------------------------------


@dataclass
class Comparison:
    n: int
    reps: int
    rows: list  # (statistic, data, sim mean, sim sd, fraction of sims below data)
    tests: list
    flags: list
    data_stats: SplitStats

    def table(self) -> str:
        lines = ["statistic,data,sim_mean,sim_sd,sim_fraction_below"]
        for r in self.rows:
            lines.append(",".join([r[0]] + [format(float(x), ".17g") for x in r[1:]]))
        return "\n".join(lines) + "\n"


def _mc_p(data: float, sims: np.ndarray) -> tuple[float, float]:
    below = float(np.mean(sims < data))
    ge = int(np.sum(sims >= data))
    le = int(np.sum(sims <= data))
    p = min(1.0, 2 * (min(ge, le) + 1) / (len(sims) + 1))
    return below, p


def compare(data: PhyloTree, reps: int, rng: np.random.Generator, threshold: float = 1e-3) -> Comparison:
    """Data split statistics, draw height and hop depths against DTCS(n) at the same n.

    Descriptive by design: the model has no free parameters, so a mismatch says
    only that the data are not a typical DTCS(n) tree.
    """
    n = data.n_leaves
    if n < 10:
        raise ValueError("comparison needs at least 10 leaves")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ds = split_stats(data)
    from .stats import draw_heights, leaf_hops

    batch = sample_batch(n, reps, rng, timed=False)
    sim = {"draw_height": [], "mean_leaf_depth": [], "max_leaf_depth": [], "mean_smaller_fraction": []}
    for r in range(reps):
        t = batch[r]
        hops = leaf_hops(t)
        sim["draw_height"].append(int(draw_heights(t)[0]))
        sim["mean_leaf_depth"].append(float(hops.mean()))
        sim["max_leaf_depth"].append(int(hops.max()))
        internal = t.size >= 2
        sz, lf = t.size[internal], t.left[internal]
        sim["mean_smaller_fraction"].append(float(np.mean(np.minimum(lf, sz - lf) / sz)))
    dval = {
        "draw_height": ds.draw_height,
        "mean_leaf_depth": float(ds.leaf_depths.mean()),
        "max_leaf_depth": int(ds.leaf_depths.max()),
        "mean_smaller_fraction": float(np.mean(ds.smaller / ds.m)) if ds.m.size else math.nan,
    }
    rows, tests, flags = [], [], []
    for k, arr in sim.items():
        a = np.asarray(arr, dtype=np.float64)
        below, p = _mc_p(dval[k], a)
        rows.append((k, dval[k], float(a.mean()), float(a.std(ddof=1)), below))
        tests.append(gof.TestResult(f"mc_{k}", float(dval[k]), p, threshold))
    u = split_pit(ds.m, ds.smaller, rng)
    if u.size >= 1:
        ks = gof.ks_test(u, lambda x: np.clip(x, 0.0, 1.0), threshold, name="split_law_pit_ks")
        tests.append(ks)
        rows.append(("split_pit_mean", float(u.mean()), 0.5, math.sqrt(1 / 12), math.nan))
        if not ks.passed:
            flags.append("extreme imbalance" if u.mean() < 0.5 else "extreme balance")
    mld = np.asarray(sim["mean_leaf_depth"])
    if dval["mean_leaf_depth"] > mld.max() and "extreme imbalance" not in flags:
        flags.append("extreme imbalance")
    if dval["mean_leaf_depth"] < mld.min() and "extreme balance" not in flags:
        flags.append("extreme balance")
    return Comparison(n, reps, rows, tests, flags, ds)


# ---------------------------------------------------------------------------
# generated corpus and fuzzing
# ---------------------------------------------------------------------------


def caterpillar(n: int) -> PhyloTree:
    node = Node("T1")
    for k in range(2, n + 1):
        node = Node(None, None, [node, Node(f"T{k}")])
    return PhyloTree(node)


def balanced(n: int) -> PhyloTree:
    """Complete binary tree on n leaves (n a power of two gives perfect balance)."""
    level = [Node(f"T{k + 1}") for k in range(n)]
    while len(level) > 1:
        nxt = [Node(None, None, [level[i], level[i + 1]]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return PhyloTree(level[0])


_ODD_NAMES = ("a b", "it's", "x(y)", "semi;colon", "comma,name", "brack[et]", "colon:name", "ünïcode", "日本", "''")


def generate_corpus(count: int, rng: np.random.Generator) -> list:
    """Random trees exercising names that need quoting, labels, lengths and polytomies."""
    out = []
    for k in range(count):
        n = int(rng.integers(1, 120))
        timed = bool(rng.random() < 0.6)
        t = sample_ctcs(n, rng) if timed else sample_dtcs(n, rng)
        names = []
        for p in range(n):
            if rng.random() < 0.15:
                names.append(_ODD_NAMES[int(rng.integers(len(_ODD_NAMES)))] + str(p))
            else:
                names.append(f"t{k}_{p}")
        tree = from_clade_tree(t, names)
        for v in tree.preorder():
            if v.is_leaf and rng.random() < 0.5:
                v.branch_length = float(rng.exponential())
            elif not v.is_leaf and rng.random() < 0.2:
                v.name = f"node{int(rng.integers(1000))}"
        # collapse a few internal edges into polytomies
        for v in list(tree.preorder()):
            if not v.is_leaf and rng.random() < 0.1:
                merged = []
                for c in v.children:
                    merged.extend(c.children if not c.is_leaf else [c])
                v.children = merged
        if rng.random() < 0.3:
            tree.root.branch_length = 0.0
        out.append(tree)
    return out


@dataclass
class FuzzResult:
    inputs: int
    parsed: int
    errors: int
    crashes: int
    max_seconds: float
    crash_examples: list


def fuzz(count: int, rng: np.random.Generator, seeds: list | None = None) -> FuzzResult:
    """Random byte strings and mutated valid statements; anything but ParseError is a crash."""
    if seeds is None:
        seeds = [serialize(t).encode("utf-8") for t in generate_corpus(20, rng)]
        seeds += [b"(A,B);", b"((A:1.0,B:2.0):0.5,C:3.0);", b"('a b',[c]C);"]
    alphabet = np.frombuffer(b"(),:;'[] \tAb0.9e-_", dtype=np.uint8)
    parsed = errors = crashes = 0
    worst = 0.0
    examples = []
    for k in range(count):
        mode = k % 3
        if mode == 0:
            data = rng.integers(0, 256, int(rng.integers(0, 200)), dtype=np.uint8).tobytes()
        elif mode == 1:
            data = alphabet[rng.integers(0, len(alphabet), int(rng.integers(0, 200)))].tobytes()
        else:
            base = bytearray(seeds[int(rng.integers(len(seeds)))])
            for _ in range(int(rng.integers(1, 6))):
                op = int(rng.integers(3))
                pos = int(rng.integers(0, len(base) + 1))
                if op == 0 and base:
                    del base[min(pos, len(base) - 1)]
                elif op == 1:
                    base.insert(pos, int(alphabet[rng.integers(len(alphabet))]))
                elif base:
                    base[min(pos, len(base) - 1)] = int(rng.integers(0, 256))
            data = bytes(base)
        t0 = time.perf_counter()
        try:
            parse(data)
            parsed += 1
        except ParseError:
            errors += 1
        except Exception as e:  # noqa: BLE001 - a crash is exactly what we are counting
            crashes += 1
            if len(examples) < 5:
                examples.append((data, repr(e)))
        worst = max(worst, time.perf_counter() - t0)
    return FuzzResult(count, parsed, errors, crashes, worst, examples)
