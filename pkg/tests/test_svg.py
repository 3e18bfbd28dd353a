import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from scipy import stats as sps

from betasplit.splitcore import make_rng
from betasplit.svg import cladogram_svg, histogram_svg
from betasplit.treemodel import sample_ctcs, tree_from_nested

NS = "{http://www.w3.org/2000/svg}"


def test_histogram_is_valid_and_deterministic():
    x = make_rng(1, 80).normal(size=5000)
    a = histogram_svg(x, "heights", density=sps.norm.pdf, xlabel="z")
    assert a == histogram_svg(x, "heights", density=sps.norm.pdf, xlabel="z")
    root = ET.fromstring(a)
    assert root.get("viewBox") == "0 0 600 400"
    bars = [r for r in root.iter(NS + "rect")][1:]  # first rect is the background
    assert len(bars) == len(np.histogram_bin_edges(x, bins="fd")) - 1
    assert root.find(NS + "polyline") is not None
    assert all(re.fullmatch(r"-?\d+\.\d\d", b.get("x")) for b in bars)


def test_histogram_caps_bins_and_rejects_empty():
    x = np.concatenate([np.zeros(10**5), [1e6]])
    assert len(list(ET.fromstring(histogram_svg(x)).iter(NS + "rect"))) <= 201
    with pytest.raises(ValueError):
        histogram_svg([np.nan])


def test_cladogram_puts_larger_clade_right():
    t = tree_from_nested((((0, 0), 0), 0))
    svg = cladogram_svg(t, "cat", names=["a", "b", "c", "d"])
    labels = [(float(e.get("x")), e.text) for e in ET.fromstring(svg).iter(NS + "text") if e.text in "abcd"]
    order = [name for _, name in sorted(labels)]
    assert order == ["d", "c", "a", "b"]


def test_cladogram_of_sampled_tree(rng):
    svg = cladogram_svg(sample_ctcs(200, rng), "n = 200")
    root = ET.fromstring(svg)
    # one horizontal bar and two verticals per internal node
    assert len(list(root.iter(NS + "line"))) == 3 * 199
