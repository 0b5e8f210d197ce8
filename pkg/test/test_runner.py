import json
import sys

import numpy as np
import pandas as pd
import pytest

from pybsvie.args import gen_args
from pybsvie.exceptions import ConfigurationError
from pybsvie.main import main
from pybsvie.runner import (
    EXIT_CONFIG,
    EXIT_DIVERGED,
    EXIT_FAILED,
    EXIT_OK,
    run_scenario,
    validate_checks,
)
from pybsvie.scenarios import Scenario


def small_scenario(**kwargs) -> Scenario:
    spec = {
        "name": "small",
        "grid": {"T": 1.0, "N": 4},
        "ensemble": {"M": 200, "d": 1, "seed": 0},
    }
    spec.update(kwargs)

    return Scenario(**spec)


@pytest.fixture(scope="module")
def zero_run(tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("zero")
    status = run_scenario("zero", out_dir)

    return status, out_dir


def test_zero(zero_run):
    status, out_dir = zero_run

    assert status == EXIT_OK
    for name in ("report.json", "solution_Y.csv", "solution_Z.csv", "iterates.csv"):
        assert (out_dir / name).exists()


def test_zero_solution(zero_run):
    _, out_dir = zero_run
    df = pd.read_csv(out_dir / "solution_Y.csv")

    assert list(df.columns) == ["t", "mean", "sd"]
    assert len(df) == 17
    np.testing.assert_allclose(df["mean"], 1.5, atol=1e-10)
    np.testing.assert_allclose(df["sd"], 0.0, atol=1e-10)

    Z = pd.read_csv(out_dir / "solution_Z.csv")
    assert list(Z.columns) == ["t", "s", "mean_abs_Z"]
    assert len(Z) == 17 * 17


def test_zero_report(zero_run):
    _, out_dir = zero_run
    report = json.loads((out_dir / "report.json").read_text())

    assert report["scenario"] == "zero"
    assert report["seed"] == 0
    assert report["exit_status"] == EXIT_OK
    assert report["passed"]
    assert report["solver"]["kind"] == "simple"
    assert set(report["checks"]) == {
        "bsvie_residual",
        "m_identity",
        "estimate_6",
        "estimate_31",
        "lower_triangle_energy",
    }
    assert all(check["passed"] for check in report["checks"].values())
    assert "bsvie_residual" in report["solver"]["residuals"]


def test_zero_report_se(zero_run):
    _, out_dir = zero_run
    report = json.loads((out_dir / "report.json").read_text())

    for name in ("estimate_6", "estimate_31", "lower_triangle_energy"):
        check = report["checks"][name]
        assert check["se"] >= 0
        assert check["value"] <= 1 + 3 * check["se"] + 1e-12


def test_reproducible(zero_run, tmp_path):
    _, out_dir = zero_run
    assert run_scenario("zero", tmp_path) == EXIT_OK

    for name in ("solution_Y.csv", "solution_Z.csv"):
        assert (out_dir / name).read_bytes() == (tmp_path / name).read_bytes()


def test_reproducible_threads(zero_run, tmp_path):
    _, out_dir = zero_run
    assert run_scenario("zero", tmp_path, threads=8) == EXIT_OK

    for name in ("solution_Y.csv", "solution_Z.csv"):
        assert (out_dir / name).read_bytes() == (tmp_path / name).read_bytes()


def test_reproducible_threads_many_blocks(tmp_path):
    scenario = small_scenario(
        ensemble={"M": 10000, "d": 1, "seed": 2},
        free_term={"name": "scaled_terminal", "params": {"scale": 1.0}},
    )
    serial, parallel = tmp_path / "serial", tmp_path / "parallel"

    assert run_scenario(scenario, serial, threads=1) == EXIT_OK
    assert run_scenario(scenario, parallel, threads=8) == EXIT_OK
    for name in ("solution_Y.csv", "solution_Z.csv"):
        assert (serial / name).read_bytes() == (parallel / name).read_bytes()


def test_exp_volterra(tmp_path):
    assert run_scenario("exp_volterra", tmp_path) == EXIT_OK

    report = json.loads((tmp_path / "report.json").read_text())
    assert report["checks"]["expected_y0"]["Y0"] == pytest.approx(np.e, rel=0.02)
    assert report["solver"]["converged"]

    iterates = pd.read_csv(tmp_path / "iterates.csv")
    assert list(iterates.columns) == ["iteration", "distance", "factor"]
    assert np.isnan(iterates["factor"].iloc[0])
    assert (iterates["factor"].dropna() < 1).all()


def test_adapted_scenario(tmp_path):
    scenario = small_scenario(
        driver={"name": "linear", "coefficients": {"const": 1.0}},
        solver={"type": "lipschitz", "mode": "adapted"},
        checks=["bsvie_residual", "estimate_30"],
    )

    assert run_scenario(scenario, tmp_path) == EXIT_OK

    Z = pd.read_csv(tmp_path / "solution_Z.csv")
    assert len(Z) == 5 * 6 // 2
    assert (Z["s"] >= Z["t"]).all()


def test_failed_check(tmp_path):
    scenario = small_scenario(
        free_term={"name": "constant", "params": {"c": 1.0}},
        checks=["expected_y0"],
        expected={"Y0": 2.0},
    )

    assert run_scenario(scenario, tmp_path) == EXIT_FAILED

    report = json.loads((tmp_path / "report.json").read_text())
    assert not report["passed"]
    assert not report["checks"]["expected_y0"]["passed"]


def test_check_override(tmp_path):
    status = run_scenario("zero", tmp_path, checks=["bsvie_residual"], seed=4)
    report = json.loads((tmp_path / "report.json").read_text())

    assert status == EXIT_OK
    assert report["seed"] == 4
    assert list(report["checks"]) == ["bsvie_residual"]


def test_divergence(tmp_path):
    spec = {
        "name": "blowup",
        "grid": {"T": 1.0, "N": 8},
        "ensemble": {"M": 200},
        "driver": {"name": "linear", "coefficients": {"y": 50.0}},
        "free_term": {"name": "constant", "params": {"c": 1.0}},
        "weights": {"beta": 1.0, "alpha2": 1.0},
        "solver": {"type": "lipschitz", "max_doublings": 0},
    }
    path = tmp_path / "blowup.json"
    path.write_text(json.dumps(spec))
    out_dir = tmp_path / "out"

    assert run_scenario(str(path), out_dir) == EXIT_DIVERGED

    report = json.loads((out_dir / "report.json").read_text())
    assert report["exit_status"] == EXIT_DIVERGED
    assert report["error"]
    assert not report["solver"]["converged"]
    assert (out_dir / "iterates.csv").exists()
    assert not (out_dir / "solution_Y.csv").exists()


@pytest.mark.parametrize(
    "kwargs",
    [
        {"driver": {"name": "quadratic"}},
        {"solver": {"mode": "adapted"}, "checks": ["m_identity"]},
        {"checks": ["bihari"]},
        {"checks": ["expected_y0"]},
        {"free_term": {"name": "scaled_terminal"}, "checks": ["estimate_31"]},
        {"solver": {"mode": "adapted"}, "driver": {"name": "eq33"}},
        {"ensemble": {"M": 20}},
    ],
)
def test_config_errors(tmp_path, kwargs):
    assert run_scenario(small_scenario(**kwargs), tmp_path) == EXIT_CONFIG


def test_unknown_scenario(tmp_path):
    assert run_scenario("no_such_scenario", tmp_path) == EXIT_CONFIG


@pytest.mark.parametrize("name", ["missing.json", "zero.json", "nowhere/zero"])
def test_missing_scenario_path(tmp_path, monkeypatch, name):
    monkeypatch.chdir(tmp_path)

    assert run_scenario(name, tmp_path / "out") == EXIT_CONFIG
    assert not (tmp_path / "out").exists()


@pytest.mark.parametrize(
    "kwargs",
    [{"grid": {"T": 1.0, "N": 128}}, {"grid": {"T": 1.0, "N": 32}, "ensemble": {"M": 1_000_000}}],
)
def test_oversized_grid(tmp_path, kwargs):
    assert run_scenario(small_scenario(**kwargs), tmp_path / "out") == EXIT_CONFIG
    assert not (tmp_path / "out").exists()


def test_degenerate_basis(tmp_path):
    scenario = small_scenario(regression={"degree": 3, "features": ["W", "int_W"], "ridge": 0.0})

    assert run_scenario(scenario, tmp_path) == EXIT_CONFIG

    report = json.loads((tmp_path / "report.json").read_text())
    assert report["exit_status"] == EXIT_CONFIG
    assert not report["passed"]
    assert report["error"].startswith("NumericalRankError")
    assert not (tmp_path / "solution_Y.csv").exists()


def test_validate_checks_order():
    scenario = small_scenario()
    cfg = scenario.build_config()

    checks = validate_checks(["estimate_6", "bsvie_residual", "estimate_6"], scenario, cfg)

    assert checks == ["bsvie_residual", "estimate_6"]


def test_validate_unknown_check():
    scenario = small_scenario()

    with pytest.raises(ConfigurationError):
        validate_checks(["bogus"], scenario, scenario.build_config())


def test_gen_args():
    args = gen_args(["--config", "zero", "-vv", "--seed", "3", "--checks", "estimate_6"])

    assert args.config == "zero"
    assert args.verbose == 2
    assert args.seed == 3
    assert args.threads == 1
    assert args.checks == ["estimate_6"]
    assert not args.list


def test_gen_args_list():
    args = gen_args(["--list"])

    assert args.list
    assert args.config is None


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["--config", "zero", "--checks", "bogus"],
        ["--config", "zero", "--threads", "0"],
        ["--config", "zero", "--seed", "-1"],
    ],
)
def test_gen_args_errors(argv):
    with pytest.raises(SystemExit):
        gen_args(argv)


def test_main_list(monkeypatch, capsys):
    monkeypatch.setattr("pybsvie.main.init", lambda **kwargs: None)
    monkeypatch.setattr(sys, "argv", ["pybsvie", "--list"])

    with pytest.raises(SystemExit) as exc_info:
        main()

    assert exc_info.value.code == 0
    assert "exp_volterra" in capsys.readouterr().out


def test_main_run(monkeypatch, tmp_path):
    monkeypatch.setattr("pybsvie.main.init", lambda **kwargs: None)
    out_dir = tmp_path / "out"
    monkeypatch.setattr(sys, "argv", ["pybsvie", "--config", "zero", "-o", str(out_dir)])

    with pytest.raises(SystemExit) as exc_info:
        main()

    assert exc_info.value.code == EXIT_OK
    assert (out_dir / "report.json").exists()
