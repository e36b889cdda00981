import csv
import json
import math

import pytest

from dislag.cases import save_case
from dislag.cli import main
from dislag.plot import write_trace_plots
from dislag.problem import Box, NodeSpec, Problem, Quadratic2

from test_dual import IEEE14_F_STAR, IEEE14_LAMBDA_STAR


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_solve_ieee14(capsys):
    code, out, _ = run_cli(capsys, "solve", "--case", "ieee14")
    assert code == 0
    res = json.loads(out)
    assert res["lambda_star"] == pytest.approx(IEEE14_LAMBDA_STAR, rel=1e-6)
    assert res["f_star"] == pytest.approx(IEEE14_F_STAR, rel=1e-6)


def test_solve_ieee118(capsys):
    code, out, _ = run_cli(capsys, "solve", "--case", "ieee118", "--seed", "1")
    assert code == 0
    res = json.loads(out)
    assert res["residual"] < 1e-6
    assert math.isfinite(res["lambda_star"])


def test_solve_infeasible_exits_2(capsys, tmp_path):
    p = Problem([NodeSpec(i, Quadratic2(1.0, 0.0), Box(0, 1), 2.0) for i in range(2)])
    path = tmp_path / "inf.txt"
    save_case(p, path, name="inf")
    code, _, err = run_cli(capsys, "solve", "--case", str(path))
    assert code == 2
    assert "Slater" in err


def test_missing_case_file_exits_2(capsys, tmp_path):
    code, _, err = run_cli(capsys, "solve", "--case", str(tmp_path / "nope.txt"))
    assert code == 2
    assert err


def test_run_dlm_ieee14(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "run-dlm", "--case", "ieee14", "--graph", "dynamic", "--p", "0.5",
                           "--seed", "3", "--out", str(tmp_path), "--plot")
    assert code == 0
    s = json.loads(out)
    assert s["terminated"]
    assert s["termination_iter"] == s["iterations"]
    assert abs(s["final_total_allocation"] - 300.0) < 3.0
    assert len(s["plots"]) == 3
    with open(s["trace"]) as fh:
        header = next(csv.reader(fh))
    assert header[0] == "k" and header[-1] == "primal_cost"


def test_run_dslm_noise_audit(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "run-dslm", "--case", "ieee14", "--noise", "uniform:0.05", "--seed", "9",
                           "--max-iters", "300", "--out", str(tmp_path))
    assert code == 0
    s = json.loads(out)
    assert s["noise_bound_respected"]
    with open(s["noise_audit"]) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5 * s["iterations"]
    assert all(abs(float(r["eta"])) <= float(r["c"]) for r in rows)
    assert all(r["within_bound"] == "1" for r in rows)


def test_zero_noise_cli_traces_identical(capsys, tmp_path):
    common = ("--case", "ieee14", "--seed", "4", "--max-iters", "150", "--no-stop")
    run_cli(capsys, "run-dlm", *common, "--out", str(tmp_path / "a"))
    run_cli(capsys, "run-dslm", *common, "--noise", "zero", "--out", str(tmp_path / "b"))
    a = (tmp_path / "a" / "trace_dlm_ieee14_p0.5_seed4.csv").read_bytes()
    b = (tmp_path / "b" / "trace_dslm_ieee14_p0.5_seed4.csv").read_bytes()
    assert a == b


def test_stream_matches_in_memory(capsys, tmp_path):
    common = ("run-dlm", "--case", "ieee14", "--seed", "2", "--max-iters", "80", "--no-stop")
    run_cli(capsys, *common, "--out", str(tmp_path / "a"))
    run_cli(capsys, *common, "--stream", "--out", str(tmp_path / "b"))
    name = "trace_dlm_ieee14_p0.5_seed2.csv"
    assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_dlm_rejects_noise(capsys, tmp_path):
    code, _, _ = run_cli(capsys, "run-dlm", "--noise", "uniform:0.1", "--out", str(tmp_path))
    assert code == 2


def test_schedule_exhausted_exits_1(capsys, tmp_path):
    from dislag.graphs import GraphSchedule

    sched = tmp_path / "sched.txt"
    GraphSchedule(5, horizon=3, seed=1).export(sched)
    code, _, err = run_cli(capsys, "run-dlm", "--schedule-file", str(sched), "--max-iters", "50",
                           "--out", str(tmp_path))
    assert code == 1
    assert "horizon" in err


def test_ensemble_and_sweep(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "ensemble", "--case", "ieee14", "--seeds", "1-4", "--max-iters", "100",
                           "--out", str(tmp_path))
    assert code == 0
    s = json.loads(out)
    assert s["seeds"] == [1, 2, 3, 4]
    assert s["K"] == 100
    code, out, _ = run_cli(capsys, "sweep", "--p-values", "0.3,0.7", "--seeds", "1-2", "--max-iters", "60",
                           "--out", str(tmp_path))
    assert code == 0
    assert json.loads(out)["runs"] == 4
    lines = (tmp_path / "sweep_dlm_ieee14.csv").read_text().splitlines()
    assert len(lines) == 5


def test_plot_command_and_empty_trace(capsys, tmp_path):
    run_cli(capsys, "run-dlm", "--seed", "1", "--max-iters", "30", "--out", str(tmp_path))
    trace = tmp_path / "trace_dlm_ieee14_p0.5_seed1.csv"
    code, out, _ = run_cli(capsys, "plot", str(trace), "--out", str(tmp_path / "svg"))
    assert code == 0
    plots = json.loads(out)["plots"]
    assert len(plots) == 3
    text = (tmp_path / "svg" / "trace_dlm_ieee14_p0.5_seed1_multipliers.svg").read_text()
    assert text.count("<polyline") == 6  # five multipliers and the optimum

    empty = tmp_path / "trace_empty.csv"
    empty.write_text(trace.read_text().splitlines()[0] + "\n")
    code, _, _ = run_cli(capsys, "plot", str(empty), "--out", str(tmp_path / "none"))
    assert code == 2
    assert not list((tmp_path / "none").glob("*.svg"))


def test_write_trace_plots_writes_nothing_on_bad_header(tmp_path):
    bad = tmp_path / "t.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        write_trace_plots(bad, tmp_path / "out")
    assert not (tmp_path / "out").exists()


def test_output_dir_from_environment(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("DISLAG_OUTPUT_DIR", str(tmp_path / "env"))
    code, _, _ = run_cli(capsys, "run-dlm", "--max-iters", "5", "--no-stop")
    assert code == 0
    assert (tmp_path / "env" / "summary_dlm_ieee14_p0.5_seed1.json").exists()
