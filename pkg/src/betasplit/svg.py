"""Hand-rolled SVG: histograms and cladogram renders.

Output is plain text with fixed-precision coordinates, so identical inputs give
identical files.
"""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .treemodel import CladeTree

WIDTH, HEIGHT = 600, 400
_MARGIN = (50, 20, 30, 40)  # left, right, top, bottom


def _f(x: float) -> str:
    return f"{x:.2f}"


def _open(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">',
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]


def histogram_svg(samples, title: str = "", density=None, xlabel: str = "") -> str:
    """Density-scaled histogram with Freedman-Diaconis bins.

    ``density`` is an optional callable drawn as a reference curve over the
    same x range (for instance the standard normal pdf).
    """
    x = np.asarray(samples, dtype=np.float64)
    x = x[np.isfinite(x)]
    if x.size == 0:
        raise ValueError("histogram needs at least one finite sample")
    edges = np.histogram_bin_edges(x, bins="fd")
    if len(edges) > 201:  # cap pathological FD counts on huge samples
        edges = np.histogram_bin_edges(x, bins=200)
    counts, edges = np.histogram(x, bins=edges, density=True)
    lo, hi = float(edges[0]), float(edges[-1])
    if hi <= lo:
        hi = lo + 1.0
    curve = None
    if density is not None:
        gx = np.linspace(lo, hi, 241)
        curve = (gx, np.asarray(density(gx), dtype=np.float64))
    ymax = float(counts.max()) if counts.size else 1.0
    if curve is not None:
        ymax = max(ymax, float(curve[1].max()))
    ymax = ymax * 1.05 or 1.0

    ml, mr, mt, mb = _MARGIN
    pw, ph = WIDTH - ml - mr, HEIGHT - mt - mb

    def sx(v):
        return ml + (v - lo) / (hi - lo) * pw

    def sy(v):
        return mt + ph - v / ymax * ph

    out = _open(title)
    out.append(f'<text x="{WIDTH // 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for c, a, b in zip(counts, edges[:-1], edges[1:]):
        x0, x1 = sx(a), sx(b)
        y0 = sy(c)
        out.append(f'<rect x="{_f(x0)}" y="{_f(y0)}" width="{_f(x1 - x0)}" height="{_f(mt + ph - y0)}" '
                   f'fill="#9ecae1" stroke="#3182bd" stroke-width="0.5"/>')
    if curve is not None:
        pts = " ".join(f"{_f(sx(a))},{_f(sy(b))}" for a, b in zip(*curve))
        out.append(f'<polyline points="{pts}" fill="none" stroke="#de2d26" stroke-width="1.5"/>')
    out.append(f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>')
    out.append(f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>')
    for v in np.linspace(lo, hi, 6):
        out.append(f'<text x="{_f(sx(v))}" y="{mt + ph + 15}" text-anchor="middle" font-size="10">{v:.2f}</text>')
    for v in np.linspace(0, ymax, 5):
        out.append(f'<text x="{ml - 5}" y="{_f(sy(v) + 3)}" text-anchor="end" font-size="10">{v:.3f}</text>')
    if xlabel:
        out.append(f'<text x="{ml + pw // 2}" y="{HEIGHT - 5}" text-anchor="middle" font-size="11">{escape(xlabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cladogram_svg(tree: CladeTree, title: str = "", names=None) -> str:
    """Cladogram drawn by draw-height: leaves on the baseline, each clade at level dh.

    The larger sub-clade is always drawn on the right and equal sizes keep their
    stored order.
    """
    from .stats import draw_heights

    n = tree.n
    dh = draw_heights(tree)
    top = max(int(dh[0]), 1)
    xs = np.zeros(len(tree.size))
    order: list[int] = []  # leaf positions in drawing order

    def place(i: int) -> None:
        # iterative postorder: children first, larger child second
        stack = [(i, False)]
        while stack:
            node, done = stack.pop()
            if tree.size[node] < 2:
                order.append(node)
                xs[node] = len(order) - 1
                continue
            li, ri = tree.children(node)
            if tree.size[li] > tree.size[ri]:
                li, ri = ri, li
            if done:
                xs[node] = (xs[li] + xs[ri]) / 2
                continue
            stack.append((node, True))
            stack.append((ri, False))
            stack.append((li, False))

    place(0)
    ml, mr, mt, mb = 20, 20, 30, 30
    pw, ph = WIDTH - ml - mr, HEIGHT - mt - mb
    span = max(n - 1, 1)

    def px(v):
        return ml + v / span * pw

    def py(level):
        return mt + ph - level / top * ph

    out = _open(title)
    out.append(f'<text x="{WIDTH // 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for i in range(len(tree.size)):
        if tree.size[i] < 2:
            continue
        li, ri = tree.children(i)
        y = py(dh[i])
        out.append(f'<line x1="{_f(px(xs[li]))}" y1="{_f(y)}" x2="{_f(px(xs[ri]))}" y2="{_f(y)}" stroke="black"/>')
        for c in (li, ri):
            out.append(f'<line x1="{_f(px(xs[c]))}" y1="{_f(y)}" x2="{_f(px(xs[c]))}" y2="{_f(py(dh[c]))}" stroke="black"/>')
    if names is not None and n <= 60:
        leaf_pos = {int(node): p for p, node in enumerate(tree.leaf_nodes)}
        for node in order:
            label = names[leaf_pos[int(node)]]
            out.append(f'<text x="{_f(px(xs[node]))}" y="{mt + ph + 14}" text-anchor="middle" font-size="9">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
