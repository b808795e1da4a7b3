import csv
import json

import numpy as np
import pytest

from dfw.cli import main
from dfw.errors import ConfigError
from dfw.harness import (
    ExperimentConfig,
    audit_report,
    grid_levels,
    replication_seed,
    run_cv_study,
    run_experiment,
)
from dfw.plots import emit_plots
from oracles import cv_exact

SMALL = dict(n=300, replications=3)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(split_ratio=1.0)
    with pytest.raises(ConfigError):
        ExperimentConfig(replications=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(schemes=("DFW", "XYZ"))
    with pytest.raises(ConfigError):
        ExperimentConfig(dataset="ihdp")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("config_version = 2\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("colour = red\n")


def test_config_from_text():
    cfg = ExperimentConfig.from_text(
        "# run\nconfig_version = 1\ndataset = nonlinear:high\nschemes = dfw, ipw\n"
        "estimators = DFW:WEIGHTED_MEAN_DIFF\nreplications = 4\nstandardize = off\n")
    assert cfg.schemes == ("DFW", "IPW")
    assert cfg.estimator_for("DFW") == "WEIGHTED_MEAN_DIFF"
    assert cfg.estimator_for("IPW") == "WEIGHTED_REGRESSION"
    assert cfg.resolved_linearity == "NONLINEAR"
    assert cfg.standardize is False


def test_low_bias_four_schemes():
    rep = run_experiment(ExperimentConfig(dataset="linear:low", **SMALL), write=False)
    assert list(rep.schemes) == ["DFW", "IPW", "CBPS", "OVERLAP"]
    eps = rep.schemes["DFW"]["epsilon_ate"]
    assert np.isfinite(eps["mean"]) and eps["mean"] > 0 and eps["std"] >= 0


def test_single_replication_unit():
    cfg = ExperimentConfig(dataset="linear:low", schemes=("UNIT",), n=300, replications=1)
    rep = run_experiment(cfg, write=False)
    e = rep.schemes["UNIT"]["epsilon_ate"]
    assert e["std"] == 0.0
    assert e["mean"] == rep.logs[0]["schemes"]["UNIT"]["epsilon_ate"]


def test_seeds_are_hashed_pairs():
    assert replication_seed(0, 1) != replication_seed(1, 0)
    assert replication_seed(5, 3) == replication_seed(5, 3)


def test_report_bytes_deterministic_and_parallel_invariant(tmp_path):
    files = ("report.json", "metrics.csv", "smd.csv", "ecdf.csv", "replications.jsonl")
    cfg = ExperimentConfig(dataset="linear:moderate", schemes=("DFW", "IPW", "CBPS", "OVERLAP", "UNIT"), **SMALL)
    run_experiment(ExperimentConfig(**{**cfg.__dict__, "output_dir": str(tmp_path / "a")}))
    run_experiment(ExperimentConfig(**{**cfg.__dict__, "output_dir": str(tmp_path / "b")}))
    run_experiment(ExperimentConfig(**{**cfg.__dict__, "output_dir": str(tmp_path / "c")}), workers=3)
    for f in files:
        a = (tmp_path / "a" / f).read_bytes()
        assert a == (tmp_path / "b" / f).read_bytes(), f
        assert a == (tmp_path / "c" / f).read_bytes(), f
    assert audit_report(tmp_path / "a") == []


def test_audit_detects_tampering(tmp_path):
    out = tmp_path / "r"
    run_experiment(ExperimentConfig(dataset="linear:low", output_dir=str(out), **SMALL))
    rep = json.loads((out / "report.json").read_text())
    rep["schemes"]["DFW"]["epsilon_ate"]["mean"] += 1e-9
    (out / "report.json").write_text(json.dumps(rep))
    assert any("epsilon_ate" in p for p in audit_report(out))


def test_output_tables(tmp_path):
    out = tmp_path / "r"
    run_experiment(ExperimentConfig(dataset="roles", output_dir=str(out), **SMALL))
    with open(out / "smd.csv") as fh:
        smd_rows = list(csv.DictReader(fh))
    features = {r["feature"] for r in smd_rows}
    assert {r["feature"] for r in smd_rows if r["scheme"] == "unweighted"} == features
    with open(out / "ecdf.csv") as fh:
        ecdf_rows = list(csv.DictReader(fh))
    groups = {}
    for r in ecdf_rows:
        groups.setdefault((r["scheme"], r["feature"], r["group"]), []).append(float(r["cumulative"]))
    for cum in groups.values():
        assert (np.diff(cum) >= 0).all() and cum[-1] == 1.0


def test_mean_diff_override_for_dfw_matches_overlap():
    cfg = ExperimentConfig(dataset="linear:low", schemes=("DFW", "OVERLAP"),
                           estimators=(("DFW", "WEIGHTED_MEAN_DIFF"),), **SMALL)
    rep = run_experiment(cfg, write=False)
    a = rep.schemes["DFW"]["ate_hat"]["mean"]
    b = rep.schemes["OVERLAP"]["ate_hat"]["mean"]
    assert a == pytest.approx(b, rel=1e-12)


def test_svg_byte_identical(tmp_path):
    out = tmp_path / "r"
    run_experiment(ExperimentConfig(dataset="linear:low", output_dir=str(out), **SMALL))
    run_cv_study(0.1, 0.9, 0.2, 3, output_dir=out)
    first = {p.name: p.read_bytes() for p in emit_plots(out)}
    second = {p.name: p.read_bytes() for p in emit_plots(out)}
    assert first == second
    assert {"smd.svg", "cv_diff.svg", "ecdf_dfw.svg", "ecdf_unweighted.svg"} <= set(first)


def test_cv_study_constant_and_mixed_tuples():
    levels = grid_levels()
    np.testing.assert_allclose(levels, np.arange(1, 10) / 10)
    r = run_cv_study(0.1, 0.9, 0.1, 6, "TUPLES")
    assert r.count == 9**6
    # itertools.product order: index of a tuple is its base-9 digit string
    def idx(tup):
        return int("".join(str(int(round(p * 10)) - 1) for p in tup), 9)

    const = idx((0.5,) * 6)
    assert r.cv_dfw[const] == 0.0 and r.cv_ipw[const] == 0.0
    mixed = idx((0.1, 0.9, 0.5, 0.5, 0.5, 0.5))
    assert r.cv_ipw[mixed] == pytest.approx(cv_exact([10, 1 / 0.9, 2, 2, 2, 2]), rel=1e-13)
    assert r.cv_dfw[mixed] == pytest.approx(cv_exact([0.9, 0.1, 0.5, 0.5, 0.5, 0.5]), rel=1e-13)


def test_cv_study_exact_rational_oracle():
    """Recount wins with exact rationals on a small grid; floats must agree."""
    from fractions import Fraction
    from itertools import product

    levels = [Fraction(k, 10) for k in range(1, 10, 2)]

    def cv2(ws):  # squared CV, exact
        m = sum(ws) / len(ws)
        return sum((w - m) ** 2 for w in ws) / len(ws) / m**2

    wins = sum(cv2([1 - p for p in tup]) < cv2([1 / p for p in tup]) for tup in product(levels, repeat=4))
    r = run_cv_study(0.1, 0.9, 0.2, 4, "TUPLES")
    assert r.wins == wins


def test_cv_study_modes_agree_when_weighted():
    t = run_cv_study(mode="TUPLES")
    m = run_cv_study(mode="MULTISETS")
    assert m.count == 3003
    assert m.weighted_fraction == pytest.approx(t.fraction, abs=1e-15)


def test_cli_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"dataset = linear:low\nreplications = 2\nn = 300\noutput_dir = {tmp_path / 'out'}\n")
    assert main(["experiment", str(cfg), "--plots"]) == 0
    assert (tmp_path / "out" / "smd.svg").exists()
    assert main(["generate", "--dataset", "nonlinear:low", "--n", "200", "--out", str(tmp_path / "g.csv")]) == 0
    assert main(["balance", str(tmp_path / "g.csv")]) == 0
    assert main(["cvstudy", "--step", "0.2", "--size", "3", "--out", str(tmp_path / "cv")]) == 0
    bad = tmp_path / "bad.cfg"
    bad.write_text("dataset = linear:low\nsplit_ratio = 1.5\n")
    assert main(["experiment", str(bad)]) == 3
    assert main(["plots", str(tmp_path / "missing")]) == 5
    (tmp_path / "ihdp").mkdir()
    ihdp = tmp_path / "ihdp.cfg"
    ihdp.write_text(f"dataset = ihdp\ndata_path = {tmp_path / 'ihdp'}\noutput_dir = {tmp_path / 'o2'}\n")
    assert main(["experiment", str(ihdp)]) == 3
