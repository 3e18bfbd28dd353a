"""Command-line front end: ``betasplit <subcommand> [--flags]``.

Exit status: 0 on success, 1 when an asserted verification test fails, 2 on a
usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from .splitcore import DomainError, make_rng

STREAMS = {"sample-dtcs": 101, "sample-ctcs": 102, "grow": 103, "prune": 104, "fringe": 105, "stats": 106,
           "newick-stats": 107}


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    n: int | None
    reps: int
    seed: int
    out: str | None
    format: str
    suite: str | None
    workers: int


class UsageError(Exception):
    pass


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return v


def _default_seed() -> int:
    env = os.environ.get("BETASPLIT_SEED")
    if env is None or env == "":
        return 0
    return _seed(env)


def _num(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _emit(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        d = os.path.dirname(out)
        if d:
            os.makedirs(d, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _index_value_csv(values, start: int) -> str:
    lines = ["index,value"]
    for k, v in enumerate(values):
        lines.append(f"{k + start},{_num(v)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _tree_text(tree, fmt: str, rep: int | None = None) -> str:
    from .svg import cladogram_svg

    if fmt == "csv":
        return tree.to_csv()
    if fmt == "newick":
        return tree.to_newick() + "\n"
    if fmt == "json":
        return json.dumps({"size": tree.size.tolist(), "left_size": tree.left.tolist(),
                           "hold_time": [None if np.isnan(h) else float(h) for h in tree.hold]}, sort_keys=True) + "\n"
    if fmt == "svg":
        return cladogram_svg(tree, f"n = {tree.n}" + (f", replicate {rep}" if rep is not None else ""))
    raise UsageError(f"format {fmt!r} is not available here")


def _many_trees(trees, fmt: str) -> str:
    if len(trees) == 1:
        return _tree_text(trees[0], fmt)
    if fmt == "csv":
        lines = ["rep,size,left_size,hold_time"]
        for r, t in enumerate(trees):
            for line in t.to_csv().splitlines()[1:]:
                lines.append(f"{r},{line}")
        return "\n".join(lines) + "\n"
    if fmt == "newick":
        return "".join(t.to_newick() + "\n" for t in trees)
    if fmt == "json":
        return "[" + ",".join(_tree_text(t, "json").strip() for t in trees) + "]\n"
    raise UsageError("svg output takes a single tree (--reps 1)")


def cmd_sample(args, timed: bool) -> int:
    from .treemodel import sample_ctcs, sample_dtcs

    rng = make_rng(args.seed, STREAMS[args.command])
    fn = sample_ctcs if timed else sample_dtcs
    trees = [fn(args.n, rng) for _ in range(args.reps)]
    _emit(_many_trees(trees, args.format), args.out)
    return 0


def cmd_grow(args) -> int:
    from .growth import grow, records_to_csv

    rng = make_rng(args.seed, STREAMS["grow"])
    bud, records = grow(args.n, rng, trace=True)
    if args.trace:
        _emit(records_to_csv(records), args.out)
    else:
        _emit(_tree_text(bud.tree, args.format), args.out)
    return 0


def cmd_prune(args) -> int:
    from .treemodel import CladeTree, prune, sample_ctcs, spanning_tree

    rng = make_rng(args.seed, STREAMS["prune"])
    if args.tree:
        with open(args.tree, encoding="utf-8") as fh:
            tree = CladeTree.from_csv(fh.read())
    else:
        if args.n is None:
            raise UsageError("give --n (sample a CTCS tree) or --tree FILE")
        tree = sample_ctcs(args.n, rng)
    if args.leaves:
        leaves = [int(x) for x in args.leaves.split(",") if x.strip()]
    else:
        if args.k is None:
            raise UsageError("give --leaves or --k")
        if not 2 <= args.k <= tree.n:
            raise UsageError("--k must lie in [2, n]")
        leaves = sorted(rng.choice(tree.n, args.k, replace=False).tolist())
    if args.spanning:
        sp = spanning_tree(tree, leaves)
        lines = ["leaf,terminal_length,height"]
        for p, tl, h in zip(sp.leaves, sp.terminal, sp.leaf_heights):
            lines.append(f"{p},{_num(tl)},{_num(h)}")
        _emit(sp.pruned.to_csv() + "\n" + "\n".join(lines) + "\n", args.out)
    else:
        _emit(_tree_text(prune(tree, leaves).tree, args.format), args.out)
    return 0


def cmd_fringe(args) -> int:
    from .chain import FringeSampler

    rng = make_rng(args.seed, STREAMS["fringe"])
    sk = FringeSampler(args.n).sample(args.levels, rng)
    lines = ["level,size,sibling_size,side"]
    lines.append("0,1,,")
    for k, (s, sib, side) in enumerate(zip(sk.sizes[1:], sk.siblings, sk.sides), start=1):
        lines.append(f"{k},{s},{sib.n},{side}")
    _emit("\n".join(lines) + "\n", args.out)
    if sk.truncated:
        print(f"warning: walk reached the horizon n = {args.n}", file=sys.stderr)
    return 0


def cmd_recurrence(args) -> int:
    from .chain import depth_mean_recurrence, depth_second_moment_recurrence, hop_mean_recurrence

    if args.quantity == "thop":
        v = hop_mean_recurrence(args.N, args.method)
    else:
        t = depth_mean_recurrence(args.N, args.method)
        if args.quantity == "t":
            v = t
        else:
            m2, var = depth_second_moment_recurrence(args.N, t, args.method)
            v = m2 if args.quantity == "m2" else var
    _emit(_index_value_csv(v[1:], 1), args.out)
    return 0


def cmd_occupancy(args) -> int:
    from .chain import occupancy

    a = occupancy(args.n, args.method)
    _emit(_index_value_csv(a[1:], 1), args.out)
    return 0


def cmd_stats(args) -> int:
    from .stats import STATS_CSV_COLUMNS, stats_csv_row
    from .treemodel import CladeTree, sample_ctcs, sample_dtcs

    if args.tree:
        with open(args.tree, encoding="utf-8") as fh:
            trees = [CladeTree.from_csv(fh.read())]
    else:
        if args.n is None:
            raise UsageError("give --n or --tree FILE")
        rng = make_rng(args.seed, STREAMS["stats"])
        fn = sample_ctcs if args.model == "ctcs" else sample_dtcs
        trees = [fn(args.n, rng) for _ in range(args.reps)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STATS_CSV_COLUMNS)
    for r, t in enumerate(trees):
        w.writerow(["" if (isinstance(v, float) and np.isnan(v)) else _num(v) for v in stats_csv_row(r, t)])
    _emit(buf.getvalue(), args.out)
    return 0


def run_config(args) -> RunConfig:
    return RunConfig(args.command, getattr(args, "n", None), getattr(args, "reps", 1), args.seed, args.out,
                     getattr(args, "format", "csv"), getattr(args, "suite", None), args.workers)


def cmd_verify(args) -> int:
    from .verify import SuiteConfig, run_suite

    rc = run_config(args)
    cfg = SuiteConfig(seed=rc.seed, workers=rc.workers, scale=rc.suite)
    only = set(x.strip() for x in args.only.split(",")) if args.only else None
    res = run_suite(cfg, log=lambda s: print(s, flush=True), only=only)
    if args.out:
        for p in res.write(args.out):
            print(f"wrote {p}")
    failed = [c for c, ok in res.criteria().items() if not ok]
    print("all asserted criteria passed" if not failed else "failed: " + ", ".join(failed))
    return 0 if res.passed else 1


def cmd_newick_stats(args) -> int:
    import warnings

    from . import newick

    try:
        trees = newick.parse_file(args.file)
    except newick.ParseError as e:
        raise UsageError(f"{args.file}: {e}") from None
    except OSError as e:
        raise UsageError(str(e)) from None
    if not trees:
        raise UsageError(f"{args.file}: no Newick statement found")
    out = io.StringIO()
    for k, tree in enumerate(trees):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            s = newick.split_stats(tree)
        for c in caught:
            print(f"warning: tree {k}: {c.message}", file=sys.stderr)
        out.write(f"# tree {k}: leaves={tree.n_leaves} binary_splits={len(s.m)} polytomies={s.polytomies} "
                  f"alpha={_num(s.alpha)} draw_height={s.draw_height} drawn_length={s.drawn_length}\n")
        out.write("m_bucket_lo,median_smaller,count\n")
        for lo, med, cnt in zip(s.bucket_lo, s.bucket_median, s.bucket_count):
            out.write(f"{lo},{_num(med)},{cnt}\n")
        if args.compare:
            if tree.n_leaves < 10:
                print(f"warning: tree {k} has fewer than 10 leaves; comparison skipped", file=sys.stderr)
                continue
            rng = make_rng(args.seed, STREAMS["newick-stats"] * 1000 + k)
            cmp = newick.compare(tree, args.reps, rng)
            out.write(cmp.table())
            for t in cmp.tests:
                out.write(f"# test {t.name}: statistic={_num(t.statistic)} p={_num(t.p_value)}\n")
            out.write(f"# flags: {', '.join(cmp.flags) if cmp.flags else 'none'}\n")
    _emit(out.getvalue(), args.out)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=None,
                        help="master seed, 64-bit unsigned (default: $BETASPLIT_SEED or 0)")
    common.add_argument("--out", default=None, help="output file or directory (default: stdout)")
    common.add_argument("--workers", type=_positive, default=1,
                        help="processes for replicate loops; never changes the output")

    p = argparse.ArgumentParser(prog="betasplit", description="Critical beta-splitting random trees.",
                                allow_abbrev=False)
    sub = p.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_, description=help_, allow_abbrev=False)

    for name, label in (("sample-dtcs", "discrete-time"), ("sample-ctcs", "continuous-time")):
        s = add(name, f"Sample {label} trees as preorder arrays.")
        s.add_argument("--n", type=_positive, required=True, help="number of leaves")
        s.add_argument("--reps", type=_positive, default=1, help="number of trees (default 1)")
        s.add_argument("--format", choices=("csv", "json", "newick", "svg"), default="csv", help="output format")

    s = add("grow", "Grow a tree bud by bud up to n buds.")
    s.add_argument("--n", type=_positive, required=True, help="final number of buds (>= 2)")
    s.add_argument("--trace", action="store_true", help="write the per-step growth trace CSV instead of the tree")
    s.add_argument("--format", choices=("csv", "json", "newick", "svg"), default="csv", help="tree output format")

    s = add("prune", "Prune a CTCS tree to a subset of leaves.")
    s.add_argument("--n", type=_positive, help="sample CTCS(n) as the source tree")
    s.add_argument("--tree", help="read the source tree from a preorder CSV file instead")
    s.add_argument("--k", type=_positive, help="keep k uniformly chosen leaves")
    s.add_argument("--leaves", help="comma-separated leaf positions to keep (0-based)")
    s.add_argument("--spanning", action="store_true", help="also write each kept leaf's terminal branch")
    s.add_argument("--format", choices=("csv", "json", "newick", "svg"), default="csv", help="output format")

    s = add("fringe", "Sample the upward fringe walk from a random leaf.")
    s.add_argument("--levels", type=_positive, default=10, help="number of upward steps (default 10)")
    s.add_argument("--n", type=_positive, default=10_000, help="horizon for the occupancy proxy (default 10000)")

    s = add("recurrence", "Exact mean/second-moment/hop recurrences as index,value CSV.")
    s.add_argument("--N", type=_positive, required=True, help="largest index")
    s.add_argument("--quantity", choices=("t", "m2", "var", "thop"), default="t", help="which sequence (default t)")
    s.add_argument("--method", choices=("reference", "fast"), default="reference", help="summation method")

    s = add("occupancy", "Occupation probabilities a(n, i), i = 1..n, as index,value CSV.")
    s.add_argument("--n", type=_positive, required=True, help="starting state")
    s.add_argument("--method", choices=("reference", "fast"), default="reference", help="summation method")

    s = add("stats", "Per-replicate tree statistics as CSV.")
    s.add_argument("--n", type=_positive, help="number of leaves")
    s.add_argument("--reps", type=_positive, default=1, help="number of trees (default 1)")
    s.add_argument("--model", choices=("ctcs", "dtcs"), default="ctcs", help="tree model (default ctcs)")
    s.add_argument("--tree", help="compute statistics of a preorder CSV tree instead")

    s = add("verify", "Run the verification suite and write JSON, CSV and SVG reports.")
    s.add_argument("--suite", choices=("core", "full"), default="core", help="suite size (default core)")
    s.add_argument("--only", help="comma-separated criteria to run, e.g. AC-1,AC-5")

    s = add("newick-stats", "Split statistics of Newick trees, optionally against DTCS simulations.")
    s.add_argument("file", help="Newick file (one or more ';'-terminated trees)")
    s.add_argument("--compare", action="store_true", help="compare each tree with DTCS(n) simulations")
    s.add_argument("--reps", type=_positive, default=200, help="simulated trees per comparison (default 200)")
    return p


HANDLERS = {
    "sample-dtcs": lambda a: cmd_sample(a, timed=False),
    "sample-ctcs": lambda a: cmd_sample(a, timed=True),
    "grow": cmd_grow,
    "prune": cmd_prune,
    "fringe": cmd_fringe,
    "recurrence": cmd_recurrence,
    "occupancy": cmd_occupancy,
    "stats": cmd_stats,
    "verify": cmd_verify,
    "newick-stats": cmd_newick_stats,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    if args.seed is None:
        try:
            args.seed = _default_seed()
        except argparse.ArgumentTypeError as e:
            print(f"betasplit: BETASPLIT_SEED: {e}", file=sys.stderr)
            return 2
    try:
        return HANDLERS[args.command](args)
    except (UsageError, DomainError) as e:
        print(f"betasplit {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
