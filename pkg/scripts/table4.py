"""Occupancy a(n, i) and first upward fringe step q_up(1, i) for small states.

    python3 scripts/table4.py --n 50000
"""
import argparse

from betasplit.chain import fringe_up_pmf, occupancy
from betasplit.verify import TABLE4_A, TABLE4_QUP, TABLE4_STATES


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=50_000)
    ap.add_argument("--method", choices=["reference", "fast"], default="reference")
    args = ap.parse_args()

    a = occupancy(args.n, args.method)
    q = fringe_up_pmf(1, args.n, a)
    print(f"{'i':>3} {'a(n,i)':>10} {'published':>10} {'q_up(1,i)':>10} {'published':>10}")
    for i, pa, pq in zip(TABLE4_STATES, TABLE4_A, TABLE4_QUP):
        print(f"{i:>3} {a[i]:>10.6f} {pa:>10.4f} {q.pmf[i]:>10.6f} {pq:>10.4f}")


if __name__ == "__main__":
    main()
