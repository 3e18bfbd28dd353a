"""Histogram of standardised random-leaf heights in CTCS(n) with the normal density overlaid.

    python3 scripts/leaf_height_histogram.py --n 3200 --reps 20000 --out clt.svg
"""
import argparse
import math

import numpy as np

from betasplit import make_rng, sample_batch
from betasplit.chain import depth_mean_recurrence, depth_second_moment_recurrence
from betasplit.stats import batch_summary
from betasplit.svg import histogram_svg


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=3200)
    ap.add_argument("--reps", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="leaf_height_histogram.svg")
    args = ap.parse_args()

    rng = make_rng(args.seed)
    batch = sample_batch(args.n, args.reps, rng)
    d = batch_summary(batch, rng)["picked_height"]
    t = depth_mean_recurrence(args.n)
    _, var = depth_second_moment_recurrence(args.n, t)
    z = (d - t[args.n]) / math.sqrt(var[args.n])

    pdf = lambda x: np.exp(-x * x / 2) / math.sqrt(2 * math.pi)  # noqa: E731
    svg = histogram_svg(z, f"Standardized leaf height, n = {args.n}", pdf, "(D - t_n) / sd")
    with open(args.out, "w") as fh:
        fh.write(svg)
    print(f"mean {z.mean():+.4f}  variance {z.var(ddof=1):.4f}  -> {args.out}")


if __name__ == "__main__":
    main()
