import csv
import math
import os
import subprocess
import sys

import pytest

from klmismatch.cli import main
from klmismatch.formats import fmt
from klmismatch.simulator import SimConfig, simulate_arrays


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def read_rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_bounds_writes_one_csv_per_kind(tmp_path, capsys):
    code, _, _ = run(["bounds", "--kinds", "nussbaum,refined", "--t", "0.08", "--grid", "512", "--out", str(tmp_path)], capsys)
    assert code == 0
    for kind in ("nussbaum", "refined"):
        rows = read_rows(tmp_path / f"{kind}.csv")
        assert rows[0] == ["delta", "value"] and len(rows) == 513


def test_bounds_three_point_grid(tmp_path, capsys):
    assert run(["bounds", "--kinds", "nussbaum", "--grid", "3", "--out", str(tmp_path)], capsys)[0] == 0
    rows = read_rows(tmp_path / "nussbaum.csv")[1:]
    assert [(float(a), round(float(b), 6)) for a, b in rows] == [(0.0, 0.0), (0.5, 0.130812), (1.0, 0.693147)]


@pytest.mark.parametrize(
    "argv, needle",
    [
        (["bounds", "--kinds", "refined"], "--t"),
        (["bounds", "--kinds", "nussbaum", "--grid", "1"], "--grid"),
        (["bounds", "--kinds", "chernoff"], "chernoff"),
        (["bounds", "--kinds", "refined", "--t", "0.7"], "--t"),
    ],
)
def test_bounds_usage_errors(argv, needle, tmp_path, capsys):
    code, _, err = run(argv + ["--out", str(tmp_path)], capsys)
    assert code == 2 and needle in err


def test_bounds_io_error(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run(["bounds", "--kinds", "nussbaum", "--out", str(blocker / "sub")], capsys)[0] == 3


def test_simulate_reports_and_is_deterministic(tmp_path, capsys):
    argv = ["simulate", "--classes", "3", "--obs", "4", "--t", "0.1", "--samples", "2000", "--seed", "42"]
    code, out, _ = run(argv + ["--out", str(tmp_path / "a.csv")], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("accepted,") and lines[0].endswith(",drawn,2000")
    assert lines[1].startswith("violations,0,max_violation,")
    run(argv + ["--out", str(tmp_path / "b.csv"), "--workers", "2"], capsys)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


@pytest.mark.parametrize(
    "extra", [["--t", "0.6"], ["--classes", "1"], ["--workers", "0"], ["--witness-mix", "2"]]
)
def test_simulate_usage_errors(extra, tmp_path, capsys):
    assert run(["simulate", "--samples", "10", "--out", str(tmp_path / "p.csv")] + extra, capsys)[0] == 2


def test_simulate_empty_result(tmp_path, capsys):
    code, _, err = run(["simulate", "--samples", "0", "--out", str(tmp_path / "p.csv")], capsys)
    assert code == 4 and "no sample" in err


def test_simulate_base_two_rescales_divergences_only(tmp_path, capsys):
    argv = ["simulate", "--classes", "3", "--obs", "3", "--t", "0.1", "--samples", "500", "--seed", "1"]
    run(argv + ["--out", str(tmp_path / "b.csv"), "--base", "2"], capsys)
    rows = read_rows(tmp_path / "b.csv")
    head, body = rows[0], rows[1:]
    pts = simulate_arrays(SimConfig(3, 3, 0.1, 500, 1)).points()
    assert len(body) == len(pts)
    ln2 = math.log(2.0)
    col = {name: i for i, name in enumerate(head)}
    for row, p in zip(body, pts):
        assert row[col["kl_joint"]] == fmt(p.kl_joint / ln2)
        assert row[col["kl_cond"]] == fmt(p.kl_conditional / ln2)
        assert row[col["bound_refined"]] == fmt(p.bound_refined / ln2)
        assert row[col["bound_nussbaum"]] == fmt(p.bound_nussbaum / ln2)
        assert row[col["delta_q"]] == fmt(p.delta_q) and row[col["tv"]] == fmt(p.total_variation)


def test_base_env_var(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("KLMISMATCH_LOG_BASE", "two")
    code, out, _ = run(["witness", "nussbaum", "--lambda", "1.0"], capsys)
    assert code == 0
    assert float(out.split(",")[5]) == pytest.approx(-math.log2(0.5 - 1e-6), abs=1e-8)
    monkeypatch.setenv("KLMISMATCH_LOG_BASE", "ten")
    assert run(["witness", "nussbaum", "--lambda", "1.0"], capsys)[0] == 2


def test_witness_examples(capsys):
    code, out, _ = run(["witness", "refined", "--lambda", "0.75", "--t", "0.08", "--eps", "1e-6", "--header"], capsys)
    assert code == 0
    head, row = out.splitlines()
    rec = dict(zip(head.split(","), row.split(",")))
    assert float(rec["delta_q"]) == pytest.approx(0.16, abs=1e-9)
    assert 0 <= float(rec["gap"]) <= 1e-5

    code, out, _ = run(["witness", "nussbaum", "--lambda", "0.75", "--eps", "1e-6"], capsys)
    cells = out.strip().split(",")
    assert code == 0 and float(cells[4]) == pytest.approx(0.5, abs=1e-9) and float(cells[7]) <= 1e-5

    assert run(["witness", "refined", "--lambda", "0.95", "--t", "0.08"], capsys)[0] == 2


def test_witness_gap_matches_hand_computation(capsys):
    lam, eps = 0.99, 0.2
    code, out, _ = run(["witness", "nussbaum", "--lambda", str(lam), "--eps", str(eps)], capsys)
    gap = -lam * math.log(1 - 2 * eps) - (1 - lam) * math.log(1 + 2 * eps)
    assert float(out.strip().split(",")[7]) == pytest.approx(gap, rel=1e-8)
    assert code == 0  # gap ~ 2(2 lam - 1) eps stays inside 10 eps


def test_verify_quick(capsys):
    code, out, _ = run(["verify", "--suite", "inequalities", "--samples", "500", "--seed", "3"], capsys)
    assert code == 0
    assert out.splitlines()[0] == "suite,check,trials,violations,worst_excess"
    assert out.strip().endswith("total_violations,0")


def test_verify_oracle_table(capsys):
    code, out, _ = run(["verify", "--suite", "oracle", "--t", "0.08", "--grid", "0.1,0.4", "--trials", "400"], capsys)
    assert code == 0
    assert "delta" in out and out.strip().endswith("total_violations,0")


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "--suite", "everything"],
        ["verify", "--samples", "0"],
        ["verify", "--suite", "oracle", "--grid", "0.1:0.9"],
        ["verify", "--suite", "oracle", "--grid", "0.95"],
    ],
)
def test_verify_usage_errors(argv, capsys):
    assert run(argv, capsys)[0] == 2


def test_plot_round_trip(tmp_path, capsys):
    pts = tmp_path / "points.csv"
    run(["simulate", "--classes", "3", "--obs", "4", "--samples", "1000", "--out", str(pts)], capsys)
    run(["bounds", "--kinds", "nussbaum,refined", "--t", "0.08", "--out", str(tmp_path)], capsys)
    out = tmp_path / "fig.svg"
    code, _, _ = run(
        ["plot", "--points", str(pts), "--curves", str(tmp_path / "nussbaum.csv"), str(tmp_path / "refined.csv"), "--out", str(out)],
        capsys,
    )
    assert code == 0
    svg = out.read_text()
    assert 'data-label="refined"' in svg and "KL divergence (nats)" in svg


def test_plot_empty_points(tmp_path, capsys):
    pts = tmp_path / "empty.csv"
    pts.write_text("")
    out = tmp_path / "fig.svg"
    assert run(["plot", "--points", str(pts), "--out", str(out)], capsys)[0] == 0
    assert ">0 points<" in out.read_text()


def test_plot_malformed_csv_names_row(tmp_path, capsys):
    curve = tmp_path / "c.csv"
    curve.write_text("delta,value\n0,0\n0.5,abc\n")
    pts = tmp_path / "p.csv"
    pts.write_text("")
    code, _, err = run(["plot", "--points", str(pts), "--curves", str(curve), "--out", str(tmp_path / "f.svg")], capsys)
    assert code == 3 and "row 3" in err
    code, _, _ = run(["plot", "--points", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "f.svg")], capsys)
    assert code == 3


def test_argparse_errors_exit_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_module_entry_point():
    env = dict(os.environ, KLMISMATCH_DISABLE_NUMBA="1")
    res = subprocess.run(
        [sys.executable, "-m", "klmismatch", "witness", "nussbaum", "--lambda", "0.6"],
        capture_output=True, text=True, env=env,
    )
    assert res.returncode == 0 and res.stdout.startswith("nussbaum,0.6,,1e-06,")
