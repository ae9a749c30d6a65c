"""End-to-end CLI tests: artifacts, determinism, exit codes."""

import csv
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from uavtc.cli import emit_plotdata, main

from helpers import BASELINE_CONFIG


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "scenario.json"
    cfg = dict(BASELINE_CONFIG)
    cfg["replications"] = 400
    cfg["m_initial"] = 5
    path.write_text(json.dumps(cfg))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------------------
# validate-config
# ---------------------------------------------------------------------------


def test_validate_config_echoes_normalized_scenario(runner, config_path):
    result = runner.invoke(main, ["validate-config", "--config", config_path])
    assert result.exit_code == 0
    echoed = json.loads(result.output)
    assert echoed["lambda"] == 0.005
    assert echoed["threshold"] == pytest.approx(0.1)
    assert echoed["speed"] == {"kind": "fixed", "v": 10.0}


def test_validate_config_reports_all_violations(runner, tmp_path):
    bad = tmp_path / "bad.json"
    cfg = dict(BASELINE_CONFIG)
    cfg.update({"lambda": -2.0, "alpha": 1.0, "r_in": 40.0})
    bad.write_text(json.dumps(cfg))
    result = runner.invoke(main, ["validate-config", "--config", str(bad)])
    assert result.exit_code == 2
    assert "lambda" in result.output
    assert "alpha must exceed 2" in result.output
    assert "r_in must be < r_out" in result.output


def test_invalid_json_exits_2(runner, tmp_path):
    mangled = tmp_path / "mangled.json"
    mangled.write_text("{not json")
    result = runner.invoke(main, ["validate-config", "--config", str(mangled)])
    assert result.exit_code == 2
    assert "JSON" in result.output


# ---------------------------------------------------------------------------
# experiment artifacts
# ---------------------------------------------------------------------------


def test_interferer_pmf_artifacts(runner, config_path, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(main, [
        "interferer-pmf", "--config", config_path, "--m", "3",
        "--sweep-t", "1", "--out", str(out)])
    assert result.exit_code == 0, result.output
    rows = read_csv(out / "results.csv")
    assert rows[0] == ["m", "t", "n", "p_analytic", "p_mc", "p_poisson_independent"]
    assert all(len(r) == 6 for r in rows[1:])
    probs = [float(r[3]) for r in rows[1:]]
    assert sum(probs) == pytest.approx(1.0, abs=1e-6)

    plot = read_csv(out / "plotdata.csv")
    assert plot[0] == ["series", "x", "y"]
    assert len(plot) == 3 * len(rows[1:]) + 1

    summary = json.loads((out / "summary.json").read_text())
    assert summary["kind"] == "interferer-pmf"
    assert summary["scenario"]["seed"] == BASELINE_CONFIG["seed"]
    assert summary["rows"] == len(rows) - 1
    assert summary["wall_seconds"] > 0


def test_retransmission_columns(runner, config_path, tmp_path):
    out = tmp_path / "rt"
    result = runner.invoke(main, [
        "retransmission", "--config", config_path, "--sweep-t", "1", "--out", str(out)])
    assert result.exit_code == 0, result.output
    rows = read_csv(out / "results.csv")
    assert rows[0] == ["t", "p_retx_analytic", "p_retx_mc", "se", "p_marginal_independent"]
    assert len(rows) == 2


def test_joint_success_columns(runner, config_path, tmp_path):
    out = tmp_path / "js"
    result = runner.invoke(main, [
        "joint-success", "--config", config_path, "--sweep-t", "1",
        "--sweep-tdb", "-10", "--out", str(out)])
    assert result.exit_code == 0, result.output
    rows = read_csv(out / "results.csv")
    assert rows[0][:5] == ["t", "threshold_db", "p_joint_analytic", "p_joint_mc", "se"]
    joint, m0, mt, indep = (float(v) for v in rows[1][2:3] + rows[1][5:8])
    assert indep == pytest.approx(m0 * mt, rel=1e-12)
    assert joint <= min(m0, mt) + 1e-9


def test_conditional_success_grid(runner, config_path, tmp_path):
    out = tmp_path / "cs"
    result = runner.invoke(main, [
        "conditional-success", "--config", config_path, "--m", "3,9",
        "--sweep-t", "1", "--sweep-tdb", "-10,0", "--out", str(out)])
    assert result.exit_code == 0, result.output
    rows = read_csv(out / "results.csv")
    assert rows[0] == ["m", "t", "threshold_db", "p_mc", "se"]
    assert len(rows) == 1 + 2 * 2


def test_compare_table_shape(runner, config_path, tmp_path):
    out = tmp_path / "cmp"
    result = runner.invoke(main, [
        "compare", "--config", config_path, "--m", "4", "--sweep-t", "1",
        "--out", str(out)])
    assert result.exit_code == 0, result.output
    rows = read_csv(out / "results.csv")
    assert rows[0] == ["quantity", "m", "t", "threshold_db", "n",
                       "analytic", "mc", "se", "z"]
    quantities = {r[0] for r in rows[1:]}
    assert {"joint", "marginal_0", "marginal_t", "retx_given_fail", "pmf"} <= quantities
    for r in rows[1:]:
        if r[7] not in ("", "0") and float(r[7]) > 0:
            assert r[8] != ""


def test_summary_defaults_m_from_config(runner, config_path, tmp_path):
    # config carries m_initial=5; --m can be omitted
    out = tmp_path / "dflt"
    result = runner.invoke(main, [
        "interferer-pmf", "--config", config_path, "--sweep-t", "1", "--out", str(out)])
    assert result.exit_code == 0, result.output
    summary = json.loads((out / "summary.json").read_text())
    assert summary["m_list"] == [5]


# ---------------------------------------------------------------------------
# determinism
# ---------------------------------------------------------------------------


def test_results_byte_identical_across_runs_and_workers(runner, config_path, tmp_path):
    args = ["compare", "--config", config_path, "--m", "4", "--sweep-t", "1"]
    out1, out2 = tmp_path / "w1", tmp_path / "w2"
    r1 = runner.invoke(main, args + ["--workers", "1", "--out", str(out1)])
    r2 = runner.invoke(main, args + ["--workers", "3", "--out", str(out2)])
    assert r1.exit_code == 0 and r2.exit_code == 0
    assert (out1 / "results.csv").read_bytes() == (out2 / "results.csv").read_bytes()
    assert (out1 / "plotdata.csv").read_bytes() == (out2 / "plotdata.csv").read_bytes()


def test_workers_env_default(runner, config_path, tmp_path):
    out = tmp_path / "env"
    result = runner.invoke(main, [
        "retransmission", "--config", config_path, "--sweep-t", "1", "--out", str(out)],
        env={"UAVTC_WORKERS": "2"})
    assert result.exit_code == 0, result.output
    assert json.loads((out / "summary.json").read_text())["workers"] == 2


def test_seed_override_changes_estimates(runner, config_path, tmp_path):
    args = ["retransmission", "--config", config_path, "--sweep-t", "1"]
    outs = []
    for seed in ("11", "12"):
        out = tmp_path / f"s{seed}"
        result = runner.invoke(main, args + ["--seed", seed, "--out", str(out)])
        assert result.exit_code == 0
        outs.append(read_csv(out / "results.csv")[1][2])
    assert outs[0] != outs[1]


# ---------------------------------------------------------------------------
# failure handling
# ---------------------------------------------------------------------------


def test_empty_sweep_list_exits_2(runner, config_path, tmp_path):
    result = runner.invoke(main, [
        "retransmission", "--config", config_path, "--sweep-t", "",
        "--out", str(tmp_path / "never")])
    assert result.exit_code == 2
    assert not (tmp_path / "never").exists()


def test_invalid_config_exits_2_without_artifacts(runner, tmp_path):
    bad = tmp_path / "bad.json"
    cfg = dict(BASELINE_CONFIG)
    cfg["p_mobile"] = 7.0
    bad.write_text(json.dumps(cfg))
    out = tmp_path / "never"
    result = runner.invoke(main, [
        "retransmission", "--config", bad, "--out", str(out)])
    assert result.exit_code == 2
    assert "p_mobile" in result.output
    assert not out.exists()


def test_degenerate_conditional_exits_3(runner, tmp_path):
    cfg = dict(BASELINE_CONFIG)
    cfg.update({"lambda": 0.0, "threshold_db": -200.0, "replications": 100})
    path = tmp_path / "degenerate.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "never"
    result = runner.invoke(main, [
        "retransmission", "--config", str(path), "--out", str(out)])
    assert result.exit_code == 3
    assert "numerical failure" in result.output
    assert not out.exists()


def test_missing_config_file_exits_2(runner):
    result = runner.invoke(main, ["retransmission", "--config", "/nonexistent.json"])
    assert result.exit_code == 2


def test_negative_workers_exits_2(runner, config_path):
    result = runner.invoke(main, [
        "retransmission", "--config", config_path, "--workers", "0"])
    assert result.exit_code == 2


# ---------------------------------------------------------------------------
# plot data reshaping
# ---------------------------------------------------------------------------


def test_emit_plotdata_header_only_input(tmp_path):
    src = tmp_path / "results.csv"
    src.write_text("t,p_retx_analytic,p_retx_mc,se,p_marginal_independent\n")
    out = emit_plotdata(src)
    assert out.read_text() == "series,x,y\n"


def test_emit_plotdata_rejects_empty_file(tmp_path):
    src = tmp_path / "results.csv"
    src.write_text("")
    with pytest.raises(ValueError, match="empty"):
        emit_plotdata(src)


def test_emit_plotdata_rejects_unknown_header(tmp_path):
    src = tmp_path / "results.csv"
    src.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError, match="unrecognized"):
        emit_plotdata(src)
