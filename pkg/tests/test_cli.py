import json
import subprocess
import sys

import pytest

from betasplit import cli
from betasplit.newick import parse
from betasplit.treemodel import CladeTree

SUBCOMMANDS = ("sample-dtcs", "sample-ctcs", "grow", "prune", "fringe", "recurrence", "occupancy", "stats",
               "verify", "newick-stats")


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_sample_ctcs_is_deterministic(capsys):
    a = run(capsys, "sample-ctcs", "--n", "20", "--seed", "7", "--format", "csv")
    b = run(capsys, "sample-ctcs", "--n", "20", "--seed", "7", "--format", "csv")
    assert a[0] == 0 and a[1] == b[1]
    tree = CladeTree.from_csv(a[1])
    assert tree.n == 20 and tree.timed
    c = run(capsys, "sample-ctcs", "--n", "20", "--seed", "8", "--format", "csv")
    assert c[1] != a[1]


def test_output_formats(capsys, tmp_path):
    _, nwk, _ = run(capsys, "sample-dtcs", "--n", "15", "--format", "newick")
    assert parse(nwk).n_leaves == 15
    _, js, _ = run(capsys, "sample-ctcs", "--n", "6", "--reps", "3", "--format", "json")
    assert len(json.loads(js)) == 3
    _, csv_many, _ = run(capsys, "sample-ctcs", "--n", "4", "--reps", "2")
    assert csv_many.splitlines()[0] == "rep,size,left_size,hold_time" and len(csv_many.splitlines()) == 15
    out = tmp_path / "t.svg"
    assert run(capsys, "sample-ctcs", "--n", "12", "--format", "svg", "--out", str(out))[0] == 0
    assert out.read_text().startswith("<svg")


def test_recurrence_hand_value(capsys, tmp_path):
    out = tmp_path / "t.csv"
    assert run(capsys, "recurrence", "--N", "100", "--out", str(out))[0] == 0
    rows = dict(line.split(",") for line in out.read_text().splitlines()[1:])
    assert abs(float(rows["4"]) - 17 / 11) < 1e-12
    assert len(rows) == 100


def test_recurrence_quantities_and_occupancy(capsys):
    _, var, _ = run(capsys, "recurrence", "--N", "3", "--quantity", "var")
    assert var.splitlines()[-1].startswith("3,1.333333333333333")
    _, occ, _ = run(capsys, "occupancy", "--n", "4")
    assert occ.splitlines()[2].startswith("2,0.636363636363636")


def test_grow_prune_fringe_stats(capsys, tmp_path):
    _, trace, _ = run(capsys, "grow", "--n", "10", "--trace")
    assert len(trace.splitlines()) == 9
    src = tmp_path / "tree.csv"
    run(capsys, "sample-ctcs", "--n", "30", "--out", str(src))
    code, pruned, _ = run(capsys, "prune", "--tree", str(src), "--leaves", "0,5,9,29")
    assert code == 0 and CladeTree.from_csv(pruned).n == 4
    code, span, _ = run(capsys, "prune", "--n", "30", "--k", "5", "--spanning")
    assert code == 0 and "leaf,terminal_length,height" in span
    code, fr, _ = run(capsys, "fringe", "--levels", "4", "--n", "2000")
    assert code == 0 and fr.splitlines()[0] == "level,size,sibling_size,side"
    code, st, _ = run(capsys, "stats", "--n", "50", "--reps", "3", "--model", "dtcs")
    assert code == 0 and len(st.splitlines()) == 4


def test_newick_stats(capsys, tmp_path):
    f = tmp_path / "x.nwk"
    f.write_text("((A,B),(C,(D,E)));\n(A,B,C);\n")
    code, out, err = run(capsys, "newick-stats", str(f))
    assert code == 0 and out.count("# tree") == 2 and "polytomies" in err
    code, out, _ = run(capsys, "newick-stats", str(f), "--compare", "--reps", "20")
    assert code == 0
    bad = tmp_path / "bad.nwk"
    bad.write_text("((A,B);")
    assert run(capsys, "newick-stats", str(bad))[0] == 2


@pytest.mark.parametrize("argv", [
    ["sample-ctcs"],
    ["sample-ctcs", "--n", "5", "--bogus"],
    ["sample-ctcs", "--n", "0"],
    ["sample-ctcs", "--n", "5", "--seed", "-1"],
    ["sample-ctcs", "--n", "5", "--seed", str(2**64)],
    ["recurrence"],
    ["prune", "--n", "5"],
    ["prune", "--n", "5", "--k", "9"],
    ["nonsense"],
    ["sample-ctcs", "--n", "5", "--reps", "2", "--format", "svg"],
    ["grow", "--n", "1"],
])
def test_usage_errors_exit_2(capsys, argv):
    assert cli.main(argv) == 2


def test_environment_seed(capsys, monkeypatch):
    monkeypatch.setenv("BETASPLIT_SEED", "7")
    a = run(capsys, "sample-ctcs", "--n", "9")[1]
    monkeypatch.delenv("BETASPLIT_SEED")
    b = run(capsys, "sample-ctcs", "--n", "9", "--seed", "7")[1]
    assert a == b
    monkeypatch.setenv("BETASPLIT_SEED", "abc")
    assert cli.main(["sample-ctcs", "--n", "3"]) == 2


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help_documents_every_flag(capsys, sub):
    assert cli.main([sub, "--help"]) == 0
    out = capsys.readouterr().out
    parser = cli.build_parser()
    action = next(a for a in parser._actions if a.dest == "command")
    for a in action.choices[sub]._actions:
        for flag in a.option_strings:
            if flag.startswith("--"):
                assert flag in out
        assert a.help


def test_verify_subset_exit_status_and_workers(capsys, tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert cli.main(["verify", "--only", "AC-6,AC-11", "--out", str(a)]) == 0
    assert cli.main(["verify", "--only", "AC-6,AC-11", "--out", str(b), "--workers", "2"]) == 0
    capsys.readouterr()
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "betasplit.cli", "recurrence", "--N", "4"],
                         capture_output=True, text=True, check=True).stdout
    assert out.splitlines()[-1] == "4,1.5454545454545454"
