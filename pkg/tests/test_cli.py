import importlib.resources as ir
import json

import pytest

from compactpf.cli import main, _generate_schemes
from compactpf.harness import (ExperimentReport, Cell, report_to_json)
from compactpf.milp_solve import parse_mps

DATA = ir.files("compactpf.data")
CASE = str(DATA / "case14.m")
UC4 = str(DATA / "uc14_t4.json")

SYSTEM = ["--case", CASE, "--uc", UC4, "--derate", "0.30"]


def test_generate_schemes_deterministic():
    a = _generate_schemes(2, 0)
    b = _generate_schemes(2, 0)
    assert a == b
    assert len(a) == 6
    assert {s.kind for s in a} == {"uniform", "per-bus-random", "sinusoidal"}


def test_cli_build_dc(tmp_path, capsys):
    out = tmp_path / "dc.mps"
    rc = main(["build", *SYSTEM, "--formulation", "dc", "--stats",
               "--out", str(out)])
    assert rc == 0
    text = out.read_text()
    model = parse_mps(text)  # well-formed MPS
    assert model.binary_indices()
    assert "binaries" in capsys.readouterr().out


def test_cli_solve_and_verify_dc(tmp_path, capsys):
    sched_path = tmp_path / "dc_sched.json"
    rc = main(["solve", *SYSTEM, "--formulation", "dc",
               "--gap", "0.01", "--out", str(sched_path)])
    assert rc == 0
    doc = json.loads(sched_path.read_text())
    assert doc["kind"] == "uc_schedule"
    rc = main(["verify-schedule", *SYSTEM, "--schedule", str(sched_path)])
    # oracle ran: feasible (0) or a clean infeasible/no-solution verdict
    assert rc in (0, 2, 3)
    out = capsys.readouterr().out
    assert "verdict:" in out


def test_cli_sample_train_compress(tmp_path, capsys):
    ds_path = tmp_path / "ds.txt"
    rc = main(["sample", *SYSTEM, "--combos-per-gen", "1",
               "--seed", "0", "--out", str(ds_path)])
    assert rc == 0
    assert ds_path.read_text().startswith("# pfdataset")

    model_path = tmp_path / "model.json"
    jac_path = tmp_path / "jstar.txt"
    rc = main(["train", *SYSTEM, "--dataset", str(ds_path),
               "--rho", "3", "--steps", "300", "--out", str(model_path),
               "--dump-jacobian", str(jac_path)])
    assert rc == 0
    doc = json.loads(model_path.read_text())
    assert doc["kind"] == "compact_pwl" and doc["rho"] == 3
    assert "bounds" not in doc
    assert jac_path.read_text().startswith("# Jstar")

    comp_path = tmp_path / "compressed.json"
    rc = main(["compress", *SYSTEM, "--model", str(model_path),
               "--dataset", str(ds_path), "--target", "0.5",
               "--steps", "200", "--bound-mode", "interval",
               "--out", str(comp_path)])
    assert rc == 0
    doc = json.loads(comp_path.read_text())
    assert "bounds" in doc
    kept = sum(sum(row) for row in doc["mask1"]) \
        + sum(sum(row) for row in doc["mask2"])
    total = len(doc["mask1"]) * len(doc["mask1"][0]) \
        + len(doc["mask2"]) * len(doc["mask2"][0])
    assert kept <= total // 2 + 1


def test_cli_report_round_trip(tmp_path, capsys):
    report = ExperimentReport(
        cells=[Cell(scenario=0, scheme="base", formulation="dc",
                    uc_status="optimal", verdict="feasible",
                    objective=1.0, mtp_objective=1.1,
                    err_ft=0.0, err_tf=0.0)],
        tallies={"dc": {"feasible": 1, "infeasible": 0, "no_solution": 0}},
        scenario_count=1, prep={})
    rp = tmp_path / "report.json"
    rp.write_text(report_to_json(report))
    out_dir = tmp_path / "out"
    rc = main(["report", "--report", str(rp), "--out", str(out_dir)])
    assert rc == 0
    assert (out_dir / "tally.txt").exists()
    assert (out_dir / "scenarios.csv").exists()
    assert (out_dir / "flow_errors.csv").exists()
    assert "feasible" in capsys.readouterr().out


def test_cli_requires_subcommand():
    with pytest.raises(SystemExit):
        main([])
