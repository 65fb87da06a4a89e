import csv
import subprocess
import sys

import pytest

from epigossip.cli import parse_range, run_command
from epigossip.formats import parse_plan, parse_problem
from epigossip.planner import verify

NEG = "agents 2\nmode two-way\ndepth 1\nchange on\nedge 1 2\ngoal + 1 2\ngoal - 2 1\n"
K4 = "agents 4\n" + "".join(f"edge {i} {j}\n" for i in range(1, 5) for j in range(i + 1, 5)) + "goal-all-depth 1\n"


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    return write


def test_parse_range():
    assert parse_range("4..10") == range(4, 11)
    assert parse_range("3") == range(3, 4)


def test_stats_rows(capsys):
    assert run_command(["stats", "--mode", "two-way", "--n", "4..10", "--d", "1..3"]) == 0
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert lines[0] == "mode,n,d,protocol,calls_or_steps,formula,match"
    assert "two-way,6,2,bipartite,12,12,true" in lines
    rows = list(csv.DictReader(lines))
    bip = [r for r in rows if r["protocol"] == "bipartite"]
    assert len(bip) == 7 * 3
    for r in bip:
        n, d = int(r["n"]), int(r["d"])
        assert int(r["calls_or_steps"]) == (d + 1) * (n - 2)
    assert all(r["match"] == "true" for r in rows)
    assert "\r" not in out


def test_stats_other_modes(capsys):
    assert run_command(["stats", "--mode", "one-way", "--n", "4", "--d", "1"]) == 0
    assert "one-way,4,1,directional,6,6,true" in capsys.readouterr().out.splitlines()
    assert run_command(["stats", "--mode", "parallel", "--n", "13", "--d", "1", "--verify"]) == 0
    assert "parallel,13,1,parallel,5,5,true" in capsys.readouterr().out.splitlines()


def test_stats_plot_and_file(tmp_path):
    csv_path, png = tmp_path / "s.csv", tmp_path / "s.png"
    assert run_command(["stats", "--n", "4..6", "--d", "1..2", "-o", str(csv_path), "--plot", str(png)]) == 0
    assert csv_path.read_text().startswith("mode,n,d,")
    assert png.stat().st_size > 0


def test_stats_rejects_bad_ranges(capsys):
    assert run_command(["stats", "--n", "1..3"]) == 2
    assert run_command(["stats", "--n", "x"]) == 2


def test_verify_neg_example(files, capsys):
    prob = files("p.gsp", NEG)
    plan = files("p.gpl", "call 1 2\nchange 1\n")
    assert run_command(["verify", prob, plan]) == 0
    assert "success" in capsys.readouterr().out
    bad = files("bad.gpl", "call 1 2\n")
    assert run_command(["verify", prob, bad]) == 1
    assert "failure" in capsys.readouterr().out


def test_verify_trace(files, capsys):
    assert run_command(["verify", files("p.gsp", NEG), files("p.gpl", "call 1 2\nchange 1\n"), "--trace"]) == 0
    assert "truths per item: 0 2 1" in capsys.readouterr().out


def test_verify_illegal_plan(files, capsys):
    prob = files("p.gsp", "agents 3\nedge 1 2\ngoal + 1 2\n")
    assert run_command(["verify", prob, files("x.gpl", "call 1 3\n")]) == 1
    assert "invalid plan" in capsys.readouterr().err


def test_search_proves_absence(files, capsys):
    assert run_command(["search", files("k4.gsp", K4), "--max", "3"]) == 1
    out = capsys.readouterr().out
    assert "no plan within budget" in out and "proven absent at <=3" in out


def test_search_finds_optimum(files, tmp_path, capsys):
    out = tmp_path / "plan.gpl"
    assert run_command(["search", files("k4.gsp", K4), "--max", "4", "--threads", "2", "-o", str(out)]) == 0
    plan = parse_plan(out.read_text())
    assert len(plan) == 4
    assert verify(parse_problem(K4), plan).success


def test_search_rejects_negative_goals(files, capsys):
    assert run_command(["search", files("p.gsp", NEG), "--max", "3"]) == 2


def test_search_budget(files, capsys):
    assert run_command(["search", files("k4.gsp", K4), "--max", "6", "--budget", "5"]) == 1
    assert "budget exhausted" in capsys.readouterr().err


def test_search_quick_infeasible(files, capsys):
    prob = files("d.gsp", "agents 4\nedge 1 2\nedge 3 4\ngoal + 1 3\n")
    assert run_command(["search", prob, "--max", "3"]) == 1
    assert "infeasible" in capsys.readouterr().err


def test_solve_neg(files, capsys):
    assert run_command(["solve-neg", files("p.gsp", NEG)]) == 0
    assert capsys.readouterr().out == "call 1 2\nchange 1\n"
    off = files("off.gsp", NEG.replace("change on", "change off"))
    assert run_command(["solve-neg", off]) == 1
    assert "unsolvable" in capsys.readouterr().out


def test_plan_command(files, tmp_path, capsys):
    prob = files("k6.gsp", "agents 6\n" + "".join(
        f"edge {i} {j}\n" for i in range(1, 7) for j in range(i + 1, 7)) + "goal-all-depth 2\n")
    assert run_command(["plan", prob]) == 0
    plan = parse_plan(capsys.readouterr().out)
    assert len(plan) == 12
    disconnected = files("dc.gsp", "agents 4\nedge 1 2\nedge 3 4\ngoal-all-depth 1\n")
    assert run_command(["plan", disconnected]) == 1


def test_reduce(files, capsys):
    dimacs = files("f.cnf", "c x1\np cnf 1 1\n1 0\n")
    assert run_command(["reduce", dimacs]) == 0
    inst = parse_problem(capsys.readouterr().out)
    assert inst.n == 6 and len(inst.graph.edges) == 7
    assert run_command(["reduce", files("bad.cnf", "1 0\n")]) == 2


def test_usage_errors(files, capsys):
    assert run_command([]) == 2
    assert run_command(["bogus"]) == 2
    assert run_command(["verify", "/nonexistent/p.gsp", "/nonexistent/q.gpl"]) == 2
    assert run_command(["verify", files("bad.gsp", "agents 2\nfoo\n"), files("q.gpl", "")]) == 2
    assert "line 2, col 1" in capsys.readouterr().err
    assert run_command(["--help"]) == 0


def test_entry_point_subprocess(files):
    prob = files("p.gsp", NEG)
    plan = files("p.gpl", "call 1 2\nchange 1\n")
    run = subprocess.run([sys.executable, "-m", "epigossip.cli", "verify", prob, plan], capture_output=True, text=True)
    assert run.returncode == 0 and "success" in run.stdout
    run = subprocess.run([sys.executable, "-m", "epigossip.cli", "stats", "--n", "x"], capture_output=True, text=True)
    assert run.returncode == 2 and run.stderr
