import csv
import json

import numpy as np
import pytest

from seqaction.cli import converged, ic_grid, main, parse_override, sweep_ics


def test_parse_override():
    assert parse_override("controller.T=0.5") == {"controller": {"T": 0.5}}
    assert parse_override("run.x0=[1, 2]") == {"run": {"x0": [1, 2]}}
    assert parse_override("controller.time_search=false") == {"controller": {"time_search": False}}
    assert main(["run", "double_integrator", "--override", "nonsense"]) == 2


def test_zero_duration_run_writes_header_only(tmp_path):
    code = main(["run", "double_integrator", "--out", str(tmp_path), "--override", "run.duration=0"])
    assert code == 0
    lines = (tmp_path / "double_integrator.csv").read_text().splitlines()
    assert lines == ["t,x_0,x_1,u_0,location,J_accum"]
    summary = json.loads((tmp_path / "double_integrator.json").read_text())
    assert summary["rows"] == 0 and summary["cycles"] == 0


def test_usage_errors_exit_two(tmp_path):
    assert main(["verify", "nonsense"]) == 2
    assert main(["run", "no_such_benchmark", "--out", str(tmp_path)]) == 2
    assert main(["run", "double_integrator", "--out", str(tmp_path), "--override", "controller.t_calc=5"]) == 2
    assert main(["frobnicate"]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("controller: [1, 2")
    assert main(["run", "double_integrator", "--config", str(bad)]) == 2


def test_config_file_selects_benchmark(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("benchmark: double_integrator\nrun:\n  duration: 0.1\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    with open(tmp_path / "double_integrator.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 11
    assert float(rows[-1]["t"]) == pytest.approx(0.1)


def test_run_output_is_deterministic(tmp_path):
    args = ["run", "double_integrator", "--override", "run.duration=0.5"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "double_integrator.csv").read_bytes()
    b = (tmp_path / "b" / "double_integrator.csv").read_bytes()
    assert a == b


def test_hybrid_run_records_transitions(tmp_path):
    assert main(["run", "ball_down", "--out", str(tmp_path), "--override", "run.duration=1.0"]) == 0
    summary = json.loads((tmp_path / "ball_down.json").read_text())
    assert summary["transitions"] >= 1
    with open(tmp_path / "ball_down.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {"q1", "q2"} <= {r["location"] for r in rows}
    assert len(rows) == summary["rows"] == 101 + 2 * summary["transitions"]


def test_ic_grid_counts():
    g = ic_grid()
    assert g.shape == (740, 2)
    assert g[:, 0].min() == 0.0 and g[:, 0].max() < 2 * np.pi
    assert g[:, 1].max() == pytest.approx(4 * np.pi)
    assert ic_grid(3, 1).shape == (3, 2)


def test_converged_wraps_angle():
    assert converged([2 * np.pi + 1e-4, 0.0])
    assert not converged([0.0, 2e-3])


def test_sweep_from_inverted_equilibrium():
    rows = sweep_ics([[0.0, 0.0], [2 * np.pi, 0.0]], {"run": {"duration": 1.0}})
    assert [r["converged"] for r in rows] == [True, True]
    assert all(r["error"] is None for r in rows)
