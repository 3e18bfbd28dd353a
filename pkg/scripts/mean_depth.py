"""Mean leaf depth t_n and its variance against log n, written as CSV to stdout.

    python3 scripts/mean_depth.py --N 100000 --points 25 > depth.csv
"""
import argparse
import csv
import math
import sys

import numpy as np

from betasplit import CONSTANTS
from betasplit.chain import depth_mean_recurrence, depth_second_moment_recurrence, hop_mean_recurrence


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=100_000)
    ap.add_argument("--points", type=int, default=25)
    ap.add_argument("--method", choices=["reference", "fast"], default="fast")
    args = ap.parse_args()

    t = depth_mean_recurrence(args.N, args.method)
    _, var = depth_second_moment_recurrence(args.N, t, args.method)
    hop = hop_mean_recurrence(args.N, args.method)
    ns = np.unique(np.geomspace(10, args.N, args.points).astype(int))

    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["n", "t_n", "t_n_over_log", "var_n", "var_over_log", "hops_n", "hops_over_log2"])
    for n in ns:
        L = math.log(n)
        out.writerow([n, f"{t[n]:.10g}", f"{t[n] / L:.6f}", f"{var[n]:.10g}", f"{var[n] / L:.6f}",
                      f"{hop[n]:.10g}", f"{hop[n] / L**2:.6f}"])
    print(f"# limits: depth/log {CONSTANTS.mu:.6f}  var/log {CONSTANTS.var_const:.6f}  "
          f"hops/log^2 {CONSTANTS.hop_const:.6f}", file=sys.stderr)


if __name__ == "__main__":
    main()
