import json

import numpy as np
import pytest

from betasplit import verify
from betasplit.verify import SuiteConfig, SuiteResult


def test_block_results_do_not_depend_on_worker_count():
    a = verify.run_tree_blocks(SuiteConfig(seed=5, workers=1), (99,), 20_000, 120, ("summary", "branchpoint"))
    b = verify.run_tree_blocks(SuiteConfig(seed=5, workers=2), (99,), 20_000, 120, ("summary", "branchpoint"))
    assert a.keys() == b.keys()
    for k in a:
        assert np.array_equal(a[k], b[k])
    p1 = verify.run_path_blocks(SuiteConfig(seed=5, workers=1), (98,), 500, 250_000)
    p2 = verify.run_path_blocks(SuiteConfig(seed=5, workers=3), (98,), 500, 250_000)
    assert np.array_equal(p1, p2)


def test_block_size_depends_only_on_n():
    assert verify.block_size(1000) == 1000
    assert verify.block_size(10**7) == 1


def test_blocks_are_seed_sensitive():
    a = verify.run_tree_blocks(SuiteConfig(seed=1), (7,), 50, 10, ("summary",))
    b = verify.run_tree_blocks(SuiteConfig(seed=2), (7,), 50, 10, ("summary",))
    assert not np.array_equal(a["mean_height"], b["mean_height"])


def small_suite(seed):
    cfg = SuiteConfig(seed=seed)
    reports = [
        verify.exp_sum_squares(cfg, reps=5000),
        verify.exp_identities(cfg, ns=(10, 100)),
        verify.exp_drift(cfg, j_max=10_000, points=5),
        verify.exp_consistency(cfg, 3, reps=5000),
    ]
    return SuiteResult(cfg, reports)


def test_json_is_byte_identical_on_rerun(tmp_path):
    a, b = small_suite(3), small_suite(3)
    assert a.to_json() == b.to_json()
    doc = json.loads(a.to_json())
    assert doc["seed"] == 3 and {"AC-2", "AC-3", "AC-6", "AC-11"} <= set(doc["criteria"])
    paths = a.write(str(tmp_path))
    assert (tmp_path / "report.json").read_text() == a.to_json()
    assert (tmp_path / "summary.csv").exists() and len(paths) >= 2


def test_small_reports_pass():
    res = small_suite(4)
    for r in res.reports:
        assert r.passed, (r.name, r.failures())
    # no AC-13 report, so the suite as a whole is incomplete
    assert not res.passed


def test_two_leaf_correlation_of_two_leaves_is_one():
    r = verify.exp_two_leaf_correlation(SuiteConfig(seed=1), 2, 20_000)
    est = r.estimates["r_hat"]
    assert est.within(1.0)
    assert r.passed


def test_two_leaf_total_variance_check():
    r = verify.exp_two_leaf_correlation(SuiteConfig(seed=2), 300, 4000)
    assert r.passed, r.failures()
    assert not any(c.asserted for c in r.checks if c.name.startswith("r_hat"))


def test_report_only_values_never_fail_a_report():
    rep = verify.Report("x", "AC-13", {})
    from betasplit import gof

    rep.checks.append(gof.check_in("out_of_band", 5.0, 0.0, 1.0, asserted=False))
    assert rep.passed and rep.failures() == []


def test_unknown_suite_rejected():
    with pytest.raises(Exception):
        verify.run_suite(SuiteConfig(scale="huge"))


def test_table4_constants_are_the_printed_values():
    assert verify.TABLE4_STATES == (2, 3, 4, 5, 10, 20, 30)
    assert verify.TABLE4_A == (0.6079, 0.4559, 0.3715, 0.3176, 0.1911, 0.1135, 0.0831)
    assert verify.TABLE4_QUP == (0.6079, 0.1520, 0.0675, 0.0381, 0.0075, 0.0017, 0.0007)
