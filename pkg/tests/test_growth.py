import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from betasplit import gof
from betasplit.chain import depth_mean_recurrence, length_constant, occupancy
from betasplit.growth import (
    KIND_NAMES,
    ctcs4_oracle,
    grow,
    grow_batch,
    grow_step,
    kind_frequencies,
    records_to_csv,
)
from betasplit.splitcore import DomainError, make_rng
from betasplit.stats import leaf_heights
from betasplit.treemodel import BudTree, sample_batch, shape_pmf, tree_from_nested


def test_grow_two_is_a_single_edge(rng):
    b = grow(2, rng)
    assert b.bud_count == 2 and b.segment_count == 1
    assert b.total_length > 0


@given(st.integers(2, 80), st.integers(0, 2**32))
def test_each_step_adds_one_bud_and_one_segment(k, seed):
    rng = make_rng(seed)
    b = grow(k, rng)
    b2, rec = grow_step(b, rng)
    assert b2.bud_count == k + 1
    assert b2.segment_count == b.segment_count + 1
    assert rec.kind in KIND_NAMES
    if rec.kind == "side_bud":
        assert rec.offset > 0 and rec.new_length is None
    else:
        assert rec.new_length > 0 and rec.edge is None


def test_grow_step_rejects_small_trees(rng):
    with pytest.raises(DomainError):
        grow(1, rng)


def test_trace_records(rng):
    b, recs = grow(30, rng, trace=True)
    assert len(recs) == 28 and b.bud_count == 30
    lines = records_to_csv(recs).splitlines()
    assert lines[0] == "step,buds_before,kind,target,edge,offset,side,new_length"
    assert len(lines) == 29


def test_ctcs2_extension_probability():
    # from CTCS(2) with edge a the step extends with probability exp(-a/2)
    a = 0.8
    t = BudTree(tree_from_nested((0, 0), holds=[a]))
    rng = make_rng(9, 30)
    reps = 40_000
    ext = sum(grow_step(t, rng)[1].kind != "side_bud" for _ in range(reps))
    p = math.exp(-a / 2)
    assert abs(ext / reps - p) < 4 * math.sqrt(p * (1 - p) / reps)


def test_ctcs4_oracle_identities():
    for a, b in [(0.1, 0.2), (1.0, 1.0), (3.0, 0.5), (10.0, 7.0)]:
        o = ctcs4_oracle(a, b)
        assert math.fsum(o.probabilities) == pytest.approx(1.0, abs=1e-12)
        # each density integrates to the matching shape probability
        for s in range(1, 5):
            f = lambda c: o.density(s, c)  # noqa: E731
            cut = max(a, b)
            val = integrate.quad(f, 0, cut, points=[min(a, b)], limit=200)[0] + integrate.quad(f, cut, np.inf)[0]
            assert val == pytest.approx(o.probabilities[s - 1], abs=1e-9)
    assert ctcs4_oracle(1e-12, 1.0).probabilities[0] < 1e-12
    assert ctcs4_oracle(1.0, 1e3).probabilities[3] < 1e-200
    with pytest.raises(DomainError):
        ctcs4_oracle(0.0, 1.0)


def test_ctcs4_oracle_symbolic():
    sympy = pytest.importorskip("sympy")
    a, b = sympy.symbols("a b", positive=True)
    ea, eb = sympy.exp(-a / 3), sympy.exp(-b / 2)
    total = (1 - ea) + ea / 3 + sympy.Rational(2, 3) * ea * (1 - eb) + sympy.Rational(2, 3) * ea * eb
    assert sympy.simplify(total - 1) == 0


def test_ctcs3_to_4_empirical_matches_oracle():
    # grow from one fixed 3-bud tree: root edge a, top edge b
    a, b = 0.6, 1.1
    t = BudTree(tree_from_nested((0, (0, 0)), holds=[a, b]))
    rng = make_rng(10, 30)
    reps = 30_000
    counts = np.zeros(4, dtype=np.int64)
    for _ in range(reps):
        _, rec = grow_step(t, rng)
        if rec.kind == "side_bud":
            counts[0 if rec.edge == 0 and rec.offset < a else 2] += 1
        elif rec.target == 0:
            counts[1] += 1  # the side-bud was extended
        else:
            counts[3] += 1
    assert gof.chi_square(counts, ctcs4_oracle(a, b).probabilities).passed


def test_grow4_matches_direct_shapes():
    pmf = shape_pmf(4)
    keys = sorted(pmf)
    shapes, _ = grow_batch(4, 200_000, make_rng(11, 30))
    direct = sample_batch(4, 200_000, make_rng(12, 30))
    idx = {k: j for j, k in enumerate(keys)}
    cg = np.zeros(len(keys), dtype=np.int64)
    cd = np.zeros(len(keys), dtype=np.int64)
    for r in range(len(shapes)):
        cg[idx[tuple(int(x) for x in shapes[r])]] += 1
        cd[idx[direct[r].shape_key()]] += 1
    assert gof.chi_square(cg, [pmf[k] for k in keys]).passed
    assert gof.chi_square_homogeneity(cg, cd).passed


def test_grow_mean_height_matches_recurrence():
    n, reps = 300, 3000
    _, means = grow_batch(n, reps, make_rng(13, 30))
    t = depth_mean_recurrence(n)[n]
    assert abs(means.mean() - t) < 4 * means.std(ddof=1) / math.sqrt(reps)


def test_grow_leaf_heights_consistent(rng):
    b = grow(50, rng)
    h = leaf_heights(b.tree)
    assert h.size == 50 and np.all(h > 0)


def test_kind_frequencies_sum_and_finite_n_identities():
    n, reps = 200, 400_000
    kf = kind_frequencies(n, reps, make_rng(14, 30))
    assert kf.counts.sum() == reps
    assert math.fsum(kf.freqs) == pytest.approx(1.0, abs=1e-15)
    # exact step-n values: p_up + p_ext = (n+1) l(n+1) - n l(n), 2 p_ext = (n+1) a(n+1,2) - n a(n,2)
    inc = (n + 1) * length_constant(n + 1).value - n * length_constant(n).value
    pair = (n + 1) * occupancy(n + 1)[2] - n * occupancy(n)[2]
    p, se = kf.length_increase
    assert abs(p - inc) < 4 * se
    q, se2 = kf.pair_increase
    assert abs(q - pair) < 4 * se2


def test_kind_frequency_methods_agree():
    a = kind_frequencies(60, 40_000, make_rng(15, 30), method="chain")
    b = kind_frequencies(60, 40_000, make_rng(16, 30), method="tree")
    assert gof.chi_square_homogeneity(a.counts, b.counts).passed
    with pytest.raises(DomainError):
        kind_frequencies(2, 10, make_rng(0))
