"""
permin - End-to-End Workflow Tests
==================================
Full pipeline runs through the orchestrator: certificate, construction,
budget, sweep and the adversarial counterexample.
"""

import csv
import json
from fractions import Fraction

import pytest

from permin.config import load_config
from permin.orchestrator import EXIT_OK, Orchestrator
from permin.serialization import dumps

FAST_SWEEP = ["sweep.trials=3", "sweep.samples=10"]


def _run(config_dir, tmp_path, name, command="pipeline", extra=(), out=None):
    cfg = load_config(config_dir / name, [*FAST_SWEEP, *extra], out_dir=out,
                      env_file=tmp_path / "missing.env")
    return Orchestrator(cfg).run(command)


def test_shift_pipeline(config_dir, tmp_path):
    result = _run(config_dir, tmp_path, "sft_example.json")
    report = result.report

    assert result.exit_code == EXIT_OK
    assert report["status"] == "ok"
    assert report["unique_minimizer"] == "(01)"
    assert report["verification"]["passed"] is True
    assert report["budget"]["L_O"] == "inf"

    sweep = report["sweep"]
    assert sweep["trials"] == 3
    assert sweep["all_passed"] is True

    adversarial = sweep["adversarial"]
    assert adversarial["passed"] is False
    assert adversarial["outside_inflated_caps"] is True


def test_pipeline_is_deterministic(config_dir, tmp_path):
    first = _run(config_dir, tmp_path, "sft_example.json")
    second = _run(config_dir, tmp_path, "sft_example.json")
    assert dumps(first.report) == dumps(second.report)


def test_seed_changes_only_the_sweep(config_dir, tmp_path):
    a = _run(config_dir, tmp_path, "sft_example.json").report
    b = _run(config_dir, tmp_path, "sft_example.json", extra=["rng_seed=8"]).report
    assert a["audit"]["config_hash"] != b["audit"]["config_hash"]
    assert a["certificate"] == b["certificate"]
    assert a["unique_minimizer"] == b["unique_minimizer"]


def test_pipeline_artifacts(config_dir, tmp_path):
    out = tmp_path / "results"
    result = _run(config_dir, tmp_path, "sft_example.json", out=str(out))

    assert sorted(p.name for p in out.iterdir()) == [
        "pipeline.json", "pipeline_stages.csv", "pipeline_sweep.csv",
    ]
    assert json.loads((out / "pipeline.json").read_text()) == result.report
    with open(out / "pipeline_sweep.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3


def test_verify_after_construction(config_dir, tmp_path):
    result = _run(config_dir, tmp_path, "sft_example.json", command="verify")
    assert result.exit_code == EXIT_OK
    assert result.report["verification"]["orbit"] == "(01)"
    assert "margins" in result.tables


@pytest.mark.slow
def test_circle_pipeline(config_dir, tmp_path):
    result = _run(config_dir, tmp_path, "circle_pipeline.json",
                  extra=["N=10", "lax_oleinik.grid_n=1024"])
    report = result.report
    assert result.exit_code == EXIT_OK
    assert report["verification"]["passed"] is True
    assert report["unique_minimizer"] == "{0}"


@pytest.mark.slow
def test_shift_sweep_with_a_hundred_trials(config_dir, tmp_path):
    result = _run(config_dir, tmp_path, "sft_example.json",
                  extra=["N=12", "sweep.trials=100", "sweep.samples=20"])
    sweep = result.report["sweep"]
    assert result.exit_code == EXIT_OK
    assert sweep["trials"] == 100
    assert len(sweep["rows"]) == 100
    assert sweep["all_passed"] is True
    assert Fraction(str(sweep["worst_margin"])) > 0
    assert sweep["adversarial"]["passed"] is False


@pytest.mark.slow
def test_circle_sweep_with_the_configured_trials(config_dir, tmp_path):
    cfg = load_config(config_dir / "circle_pipeline.json", env_file=tmp_path / "missing.env")
    assert cfg.sweep.trials == 100
    result = Orchestrator(cfg).run("pipeline")
    sweep = result.report["sweep"]
    assert result.exit_code == EXIT_OK
    assert result.report["unique_minimizer"] == "{0}"
    assert sweep["trials"] == 100
    assert sweep["all_passed"] is True
    assert Fraction(str(sweep["worst_margin"])) > 0
    assert sweep["adversarial"]["passed"] is False
