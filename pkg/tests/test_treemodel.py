import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from betasplit import gof
from betasplit.splitcore import DomainError, make_rng
from betasplit.stats import branchpoint_height, leaf_heights, sum_squares_at
from betasplit.treemodel import (
    BudTree,
    CladeTree,
    clades_at,
    delete_leaf,
    delete_leaf_batch,
    prune,
    sample_batch,
    sample_ctcs,
    sample_dtcs,
    shape_pmf,
    spanning_tree,
    tree_from_nested,
)


def ancestors(tree, leaf):
    """Brute-force list of nodes whose interval holds ``leaf``."""
    starts = tree.leaf_starts()
    return [i for i in range(len(tree.size)) if starts[i] <= leaf < starts[i] + tree.size[i]]


@given(st.integers(1, 300), st.integers(0, 2**32))
def test_sampled_trees_are_well_formed(n, seed):
    t = sample_ctcs(n, make_rng(seed))
    assert t.n == n
    assert len(t.internal) == n - 1
    assert len(t.leaf_nodes) == n
    if n >= 2:
        assert t.timed
        assert np.all(t.hold[t.internal] > 0)
        # split heights are distinct with probability one
        birth = t.birth_heights()[t.internal] + t.hold[t.internal]
        assert len(np.unique(birth)) == n - 1


def test_single_leaf_and_domain(rng):
    t = sample_dtcs(1, rng)
    assert t.n == 1 and not t.timed
    with pytest.raises(DomainError):
        sample_dtcs(0, rng)


def test_n20_has_19_internal_nodes(rng):
    assert len(sample_dtcs(20, rng).internal) == 19


def test_dtcs_n3_root_split_is_fair():
    batch = sample_batch(3, 100_000, make_rng(2, 20), timed=False)
    counts = np.bincount(batch.left[:, 0], minlength=3)[1:]
    assert gof.chi_square(counts, [0.5, 0.5]).passed


def test_ctcs_n2_hold_mean():
    batch = sample_batch(2, 1_000_000, make_rng(3, 20))
    x = batch.hold[:, 0]
    assert abs(x.mean() - 1.0) < 4 * x.std() / math.sqrt(x.size)


def test_csv_roundtrip(rng):
    t = sample_ctcs(37, rng)
    assert CladeTree.from_csv(t.to_csv()) == t
    u = sample_dtcs(12, rng)
    assert CladeTree.from_csv(u.to_csv()) == u
    assert u.to_csv().splitlines()[0] == "size,left_size,hold_time"


def test_invalid_arrays_rejected():
    with pytest.raises(DomainError):
        CladeTree(np.array([3, 1, 1]), np.array([1, 0, 0]), np.full(3, np.nan))
    with pytest.raises(DomainError):
        CladeTree(np.array([2, 1, 1]), np.array([1, 0, 0]), np.array([-1.0, np.nan, np.nan]))


def test_clades_at_examples(rng):
    t = sample_ctcs(50, rng)
    assert list(clades_at(t, 0.0)) == [50]
    assert np.all(clades_at(t, leaf_heights(t).max() + 1) == 1)
    for s in np.linspace(0, 5, 11):
        sizes = clades_at(t, s)
        assert sizes.sum() == 50
        assert sum_squares_at(t, s) == float(np.sum(sizes.astype(float) ** 2))


def test_spanning_tree_examples(rng):
    t = sample_ctcs(30, rng)
    full = spanning_tree(t, range(30))
    assert full.pruned == t
    assert np.allclose(full.terminal, 0)
    one = spanning_tree(t, [7])
    assert one.pruned.n == 1
    assert one.leaf_heights[0] == pytest.approx(leaf_heights(t)[7])
    two = spanning_tree(t, [3, 20])
    common = set(ancestors(t, 3)) & set(ancestors(t, 20))
    birth = t.birth_heights()
    sep = max(birth[i] + t.hold[i] for i in common)
    assert two.pruned.n == 2
    assert two.pruned.hold[0] == pytest.approx(sep)
    np.testing.assert_allclose(two.leaf_heights, leaf_heights(t)[[3, 20]])


def test_prune_all_leaves_is_identity(rng):
    t = sample_ctcs(25, rng)
    assert prune(t, range(25)) == BudTree(t)
    with pytest.raises(DomainError):
        prune(t, [4])


def test_prune_two_leaves_across_root():
    t = tree_from_nested((0, (0, 0)), holds=[0.7, 1.3])
    b = prune(t, [0, 2])
    assert b.bud_count == 2
    assert b.total_length == pytest.approx(0.7)


@given(st.integers(3, 60), st.integers(0, 2**32), st.data())
def test_prune_commutes_with_spanning(n, seed, data):
    rng = make_rng(seed)
    t = sample_ctcs(n, rng)
    sel = data.draw(st.sets(st.integers(0, n - 1), min_size=2, max_size=n))
    sp = spanning_tree(t, sel)
    assert prune(sp, sel) == prune(t, sel)
    sub = sorted(sel)[: max(2, len(sel) // 2)]
    assert prune(sp, sub) == prune(t, sub)


@given(st.integers(2, 40), st.integers(0, 2**32))
def test_branchpoint_matches_common_ancestor_scan(n, seed):
    rng = make_rng(seed)
    t = sample_ctcs(n, rng)
    u, v = rng.choice(n, 2, replace=False)
    birth = t.birth_heights()
    common = set(ancestors(t, u)) & set(ancestors(t, v))
    assert branchpoint_height(t, u, v) == pytest.approx(max(birth[i] + t.hold[i] for i in common))
    assert branchpoint_height(t, u, v) == branchpoint_height(t, v, u)


def test_budtree_edge_view():
    # root (3) splits 1 | 2 after 0.5; the 2-clade splits after 0.25
    t = tree_from_nested((0, (0, 0)), holds=[0.5, 0.25])
    b = BudTree(t)
    e = b.root_edge()
    assert e.length == pytest.approx(0.75)
    assert e.side_buds == [(0.5, "left")]
    assert e.ends_in_pair
    assert b.segment_count == 2
    assert b.total_length == pytest.approx(0.75)


def test_delete_leaf_batch_matches_single(rng):
    batch = sample_batch(9, 40, rng)
    dels = rng.integers(0, 9, 40)
    out = delete_leaf_batch(batch, dels)
    for r in range(40):
        assert out[r] == delete_leaf(batch[r], int(dels[r])).tree
    with pytest.raises(DomainError):
        delete_leaf_batch(sample_batch(2, 3, rng), [0, 0, 0])


def test_shape_pmf_n4():
    p = shape_pmf(4)
    expected = {(1, 1, 1): 2 / 11, (1, 2, 1): 2 / 11, (2, 1, 1): 3 / 11, (3, 1, 1): 2 / 11, (3, 2, 1): 2 / 11}
    assert p.keys() == expected.keys()
    for k in p:
        assert p[k] == pytest.approx(expected[k], abs=1e-15)
    for n in range(1, 9):
        assert math.fsum(shape_pmf(n).values()) == pytest.approx(1.0, abs=1e-12)


def test_ctcs_shape_forgets_times():
    # a CTCS sample with its times dropped is a DTCS sample
    n = 5
    pmf = shape_pmf(n)
    keys = sorted(pmf)
    idx = {k: j for j, k in enumerate(keys)}
    batch = sample_batch(n, 60_000, make_rng(4, 20))
    counts = np.zeros(len(keys), dtype=np.int64)
    for r in range(len(batch)):
        counts[idx[batch[r].shape_key()]] += 1
    assert gof.chi_square(counts, [pmf[k] for k in keys]).passed


def test_newick_export(rng):
    t = tree_from_nested((0, (0, 0)), holds=[0.5, 0.25])
    assert t.to_newick() == "(L1,(L2,L3):0.25):0.5;"
    assert tree_from_nested((0, 0)).to_newick(["a", "b"]) == "(a,b);"
