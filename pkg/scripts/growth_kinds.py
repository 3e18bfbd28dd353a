"""Frequencies of the three growth-step kinds at k -> k + 1, with the exact increments.

    python3 scripts/growth_kinds.py --n 200 --reps 400000
"""
import argparse

from betasplit import make_rng
from betasplit.chain import length_constant, occupancy
from betasplit.growth import kind_frequencies


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--reps", type=int, default=400_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--method", choices=["chain", "tree"], default="chain")
    args = ap.parse_args()
    n = args.n

    kf = kind_frequencies(n, args.reps, make_rng(args.seed), args.method)
    se = kf.stderr()
    print(f"side bud              {kf.p_side:.5f} +/- {se[0]:.5f}")
    print(f"branch extension      {kf.p_up:.5f} +/- {se[1]:.5f}")
    print(f"side-leaf extension   {kf.p_ext:.5f} +/- {se[2]:.5f}")

    a_n, a_n1 = occupancy(n), occupancy(n + 1)
    inc = (n + 1) * length_constant(n + 1).value - n * length_constant(n).value
    print(f"length increase  {kf.length_increase[0]:.5f}  exact {inc:.5f}")
    print(f"pair increase    {kf.pair_increase[0]:.5f}  exact {(n + 1) * a_n1[2] - n * a_n[2]:.5f}")


if __name__ == "__main__":
    main()
