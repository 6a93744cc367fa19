import csv
import dataclasses
import json

import numpy as np
import pytest

from cransec.harness.acceptance import AcceptanceReport, Check, CriterionResult, inject_violation
from cransec.harness.cli import build_parser, main
from cransec.harness.experiment import (
    EXPERIMENTS, ROW_FIELDS, ExperimentSpec, apply_grid, ci_halfwidth, run_experiment, trial_seed,
)
from cransec.model import SystemConfig, dbm_to_watt


# -- specs ---------------------------------------------------------------------------

def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec("sweep_nothing")
    with pytest.raises(ValueError):
        ExperimentSpec("sweep_pbs", grid=[])
    with pytest.raises(ValueError):
        ExperimentSpec("sweep_pbs", variants=("total", "bogus"))
    with pytest.raises(ValueError):
        ExperimentSpec("sweep_pbs", n_trials=0)
    with pytest.raises(ValueError):
        ExperimentSpec.from_dict({"experiment": "sweep_pbs", "grdi": [1]})
    assert ExperimentSpec("sweep_eves").name == "sweep_eves"


def test_spec_round_trip_and_dbm_keys(tmp_path):
    path = tmp_path / "s.yaml"
    path.write_text("experiment: sweep_pcp\ngrid: [20, 30]\nbase:\n  p_bs_total_dbm: 0\n  n_users: 3\n")
    spec = ExperimentSpec.load(path)
    assert spec.base.p_bs_total == pytest.approx(dbm_to_watt(0.0))
    assert spec.base.n_users == 3
    back = ExperimentSpec.from_dict({k: v for k, v in spec.to_dict().items()})
    assert back == spec
    jpath = tmp_path / "s.json"
    jpath.write_text(json.dumps(spec.to_dict()))
    assert ExperimentSpec.load(jpath) == spec


def test_shipped_specs_load():
    from pathlib import Path
    root = Path(__file__).resolve().parents[1] / "experiments"
    names = sorted(p.stem for p in root.glob("*.yaml"))
    assert set(names) == set(EXPERIMENTS)
    for p in root.glob("*.yaml"):
        assert ExperimentSpec.load(p).experiment == p.stem


def test_apply_grid_sets_the_swept_field():
    cfg = SystemConfig(csi_error_ratio=0.05)
    assert apply_grid(cfg, "sweep_pbs", 10).p_bs_total == pytest.approx(dbm_to_watt(10))
    assert apply_grid(cfg, "sweep_pcp", 40).p_cp == pytest.approx(dbm_to_watt(40))
    assert apply_grid(cfg, "sweep_users", 3).n_users == 3
    assert apply_grid(cfg, "sweep_eves", 2).csi_error_ratio == (0.05, 0.05)
    assert apply_grid(cfg, "sweep_sigma", 0.01).csi_error_ratio == (0.01,)
    assert apply_grid(cfg, "convergence", 0) == cfg


def test_trial_seeds():
    assert trial_seed(1, 0, 3) == trial_seed(1, 0, 3)
    assert trial_seed(1, 0, 3) != trial_seed(1, 1, 3)
    assert trial_seed(1, 0, 3, crn=True) == trial_seed(1, 1, 3, crn=True)
    assert trial_seed(1, 0, 3, crn=True) != trial_seed(1, 0, 4, crn=True)


def test_ci_halfwidth_matches_t_table():
    vals = np.array([1.0, 2.0, 3.0, 4.0])
    # t_{0.975, 3} = 3.182446305
    assert ci_halfwidth(vals) == pytest.approx(3.182446305 * vals.std(ddof=1) / 2, rel=1e-8)
    assert ci_halfwidth([5.0]) == 0.0


# -- runs ----------------------------------------------------------------------------

def test_single_trial_without_eavesdroppers(tmp_path):
    spec = ExperimentSpec("sweep_eves", grid=[0], n_trials=1, variants=("total",), outdir=str(tmp_path),
                          n_candidates=5)
    res = run_experiment(spec)
    (row,) = res.rows
    assert row["status"] == "ok"
    assert row["secrecy"] == pytest.approx(row["access_sum"])
    assert row["access_sum"] <= row["fronthaul_min"] * (1 + 1e-9)
    assert row["power_residual"] <= 1e-9
    with open(res.paths["csv"]) as fh:
        table = list(csv.DictReader(fh))
    assert list(table[0]) == list(ROW_FIELDS)
    assert float(table[0]["secrecy"]) == pytest.approx(row["secrecy"], rel=1e-9)
    summary = json.loads(res.paths["summary"].read_text())
    assert summary["points"][0]["n_ok"] == 1
    assert res.traces and res.traces[0]["iteration"] == 1


def test_runs_are_byte_identical(tmp_path):
    base = dict(experiment="sweep_pbs", grid=[0, 10], n_trials=1, variants=("total",), recover=False)
    a = run_experiment(ExperimentSpec(outdir=str(tmp_path / "a"), **base))
    b = run_experiment(ExperimentSpec(outdir=str(tmp_path / "b"), **base))
    for key in ("csv", "traces", "summary"):
        assert a.paths[key].read_bytes() == b.paths[key].read_bytes()


def test_failures_become_error_rows(tmp_path, monkeypatch):
    from cransec.harness import experiment

    def broken(*args, **kwargs):
        raise RuntimeError("solver down")

    monkeypatch.setattr(experiment, "solve_srm", broken)
    spec = ExperimentSpec("convergence", n_trials=1, variants=("total",), outdir=str(tmp_path))
    res = run_experiment(spec, write=False)
    assert res.rows[0]["status"].startswith("error:")
    assert res.summary["points"][0]["n_ok"] == 0
    assert res.paths == {}


# -- acceptance plumbing ----------------------------------------------------------------

def test_check_senses():
    assert Check("a", 1.0, 2.0).passed and not Check("a", 3.0, 2.0).passed
    assert Check("b", 3.0, 2.0, "ge").passed and not Check("b", 1.0, 2.0, "ge").passed
    assert not Check("c", 0.0, 0.0, "gt").passed
    assert not Check("d", float("nan"), 1.0).passed


def test_injection_flips_every_check():
    res = CriterionResult("C8", [Check("x", 0.0, 1e-6), Check("y", 1.0, 0.9, "ge")])
    rep = AcceptanceReport({"C8": res}, 0.0)
    assert rep.passed
    bad = inject_violation(rep, {"C8": 10.0})
    assert not bad.passed
    assert all(not c.passed for c in bad.criteria["C8"].checks)
    assert "FAIL" in bad.lines()[0]


# -- command line ----------------------------------------------------------------------

def test_cli_parser_rejects_bad_variants():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["demo", "--variants", "total,nope"])


def test_cli_demo(tmp_path, capsys):
    assert main(["demo", "--seed", "2", "--variants", "total", "--outdir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "total" in out and "bit/s/Hz" in out
    assert (tmp_path / "case.json").exists() and (tmp_path / "total_trace.csv").exists()


def test_cli_run(tmp_path, capsys):
    spec = tmp_path / "s.yaml"
    spec.write_text("experiment: sweep_sigma\ngrid: [0.0]\nn_trials: 1\nvariants: [robust]\nrecover: false\n")
    assert main(["run", str(spec), "--outdir", str(tmp_path / "out"), "--seed", "3"]) == 0
    out = capsys.readouterr().out
    assert "sweep_sigma" in out
    assert (tmp_path / "out" / "sweep_sigma.csv").exists()


def test_cli_accept_passes_and_injection_fails(tmp_path, capsys):
    assert main(["accept", "--only", "C8", "--outdir", str(tmp_path)]) == 0
    assert "C8 PASS" in capsys.readouterr().out
    report = json.loads((tmp_path / "acceptance.json").read_text())
    assert report["passed"]
    assert main(["accept", "--only", "C8", "--inject", "C8"]) == 1
    assert "C8 FAIL" in capsys.readouterr().out


def test_settings_replace():
    from cransec.harness.acceptance import AcceptanceSettings
    s = AcceptanceSettings()
    s2 = dataclasses.replace(s, only=("C7",))
    assert s2.only == ("C7",) and s.n_instances == 20
