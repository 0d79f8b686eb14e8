import json
from dataclasses import replace
from pathlib import Path

import pytest

from dynpg.errors import BranchCutError
from dynpg.harness import (DEFAULT_TOLERANCES, SUITE_ORDER, ConfigError, SuiteReport, calibrate, load_config,
                           run_suite)
from dynpg.harness.cli import main
from dynpg.harness.report import _clean
from dynpg.harness.suites import _res, _run_samples
from dynpg.residual import Residual

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_yaml(tmp_path, text):
    path = tmp_path / "cfg.yaml"
    path.write_text(text)
    return str(path)


@pytest.fixture(scope="module")
def default_report():
    return run_suite(load_config(str(CONFIGS / "default.yaml")))


# configuration -------------------------------------------------------------------

def test_defaults_validate():
    cfg = load_config()
    assert cfg.suites == SUITE_ORDER
    assert cfg.tolerances == DEFAULT_TOLERANCES


@pytest.mark.parametrize("name", ["default", "negative_control", "sl3_full"])
def test_shipped_configs_load(name):
    cfg = load_config(str(CONFIGS / f"{name}.yaml"))
    assert cfg.series == "A"
    cfg.r_matrix()


def test_yaml_overrides_tolerance_class(tmp_path):
    cfg = load_config(write_yaml(tmp_path, "tolerances:\n  jacobi_fd: 2.0e-5\n"))
    assert cfg.tol("jacobi_fd") == 2e-5
    assert cfg.tol("cocycle") == DEFAULT_TOLERANCES["cocycle"]


@pytest.mark.parametrize("text", [
    "colour: red\n",
    "rank: 4\n",
    "series: B\n",
    "rank: 1\ngamma: [1]\n",
    "r_mode: other\n",
    "samples: 0\n",
    "rank: 2\nmu: [0.1]\n",
    "tolerances:\n  made_up: 1.0\n",
    "tolerances:\n  cocycle: 0\n",
    "suites: [liealg, other]\n",
    "- 1\n- 2\n",
])
def test_invalid_configs_rejected(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write_yaml(tmp_path, text))


def test_twoform_validation(tmp_path):
    cfg = load_config(write_yaml(tmp_path, "rank: 2\ngamma: [0]\ntwoform:\n  constant: [[0, 1], [1, 0]]\n"))
    with pytest.raises(ConfigError):
        cfg.r_matrix()
    cfg = load_config(write_yaml(tmp_path, "rank: 2\ngamma: [0]\ntwoform:\n  constant: [[0, 1], [-1, 0]]\n"))
    assert cfg.r_matrix().twoform.const[0, 1] == 1


def test_missing_file_is_os_error():
    with pytest.raises(OSError):
        load_config("/nonexistent/config.yaml")


def test_overrides():
    cfg = load_config().with_overrides(seed=3, suites=["liealg"])
    assert cfg.seed == 3 and cfg.suites == ("liealg",)
    with pytest.raises(ConfigError):
        load_config().with_overrides(suites=["nope"])


# reports ---------------------------------------------------------------------------

def test_empty_suite_does_not_pass():
    rep = SuiteReport("x")
    assert not rep.passed and rep.status == "fail"


def test_not_applicable_suite_passes():
    rep = SuiteReport("x", not_applicable="no such structure")
    assert rep.passed and rep.status == "not_applicable"
    assert rep.summary()["reason"] == "no such structure"


def test_skip_rate_threshold():
    rep = SuiteReport("x", attempted=10)
    rep.add("algebra", [Residual("r", 0.0, 1.0)])
    rep.skip("a")
    assert rep.passed
    rep.skip("b")
    assert not rep.passed


def test_clean_handles_complex_and_numpy():
    import numpy as np
    assert _clean({"a": 1 + 2j, "b": 3 + 0j, "c": np.float64(0.5), "d": (np.int64(2),)}) == \
        {"a": [1.0, 2.0], "b": 3.0, "c": 0.5, "d": [2]}


# sample accounting ---------------------------------------------------------------

def test_rejected_samples_are_replaced():
    cfg = replace(load_config(), samples=3)
    rep = SuiteReport("accounting")
    calls = []

    def body(rng):
        calls.append(1)
        if len(calls) == 2:
            raise BranchCutError("on the cut")
        return [("algebra", [_res("probe", 0.0)])]

    _run_samples(rep, cfg, body)
    assert rep.attempted == 4 and rep.skipped == 1 and len(rep.records) == 3
    assert rep.records[0][1].tolerance == DEFAULT_TOLERANCES["algebra"]
    assert rep.skip_reasons == ["main: BranchCutError"]
    assert not rep.passed  # 1 of 4 exceeds the 10% skip budget


def test_replacement_budget_exhausted():
    cfg = replace(load_config(), samples=2)
    rep = SuiteReport("accounting")

    def body(rng):
        raise BranchCutError("always")

    _run_samples(rep, cfg, body)
    assert rep.attempted == 4 and rep.error.startswith("main: only 0 of 2")
    assert not rep.passed


def test_samples_use_independent_generators():
    cfg = replace(load_config(), samples=2)
    seen = []
    _run_samples(SuiteReport("s"), cfg, lambda rng: seen.append(rng.random()) or [])
    again = []
    _run_samples(SuiteReport("s"), cfg, lambda rng: again.append(rng.random()) or [])
    assert seen == again and seen[0] != seen[1]


# runs -------------------------------------------------------------------------------

def test_default_run_passes(default_report):
    assert default_report.passed
    assert [s.name for s in default_report.suites] == list(SUITE_ORDER)
    assert all(s.status == "pass" for s in default_report.suites)


def test_every_record_uses_its_ledger_tolerance(default_report):
    classes = set()
    for rec in default_report.records():
        classes.add(rec["class"])
        assert rec["tolerance"] == DEFAULT_TOLERANCES[rec["class"]]
    assert classes <= set(DEFAULT_TOLERANCES)


def test_calibration_table(default_report):
    cal = default_report.calibration
    assert cal["chi_scale"] == 0.25
    assert cal["dual_embedding_sign"] == -1
    assert cal == calibrate(load_config(str(CONFIGS / "default.yaml")))


def test_single_suite_selection():
    report = run_suite(load_config().with_overrides(suites=["liealg"]))
    assert [s.name for s in report.suites] == ["liealg"]
    assert report.passed


def test_serialization_deterministic():
    cfg = load_config().with_overrides(suites=["liealg", "dynrmat"])
    a, b = run_suite(cfg), run_suite(cfg)
    assert a.dumps_records() == b.dumps_records()
    assert a.dumps_summary() == b.dumps_summary()
    assert "wall_time" not in a.dumps_summary()
    assert "wall_time" in run_suite(cfg, timing=True).dumps_summary(timing=True)


def test_negative_control_skips_downstream():
    report = run_suite(load_config(str(CONFIGS / "negative_control.yaml")))
    status = {s.name: s for s in report.suites}
    assert status["liealg"].status == "pass"
    assert status["dynrmat"].status == "fail"
    for name in ("pgroupoid", "bialgebroid", "doublegpd"):
        assert status[name].status == "skipped"
        assert status[name].summary()["skip_reason"] == "dependency failed: dynrmat"
    assert not report.passed


def test_constant_mode_has_no_vertex_bialgebroid():
    cfg = replace(load_config(), r_mode="standard-constant", suites=("liealg", "dynrmat", "bialgebroid"))
    report = run_suite(cfg)
    bia = [s for s in report.suites if s.name == "bialgebroid"][0]
    assert bia.status == "not_applicable"
    assert report.passed


# command line ---------------------------------------------------------------------

def test_cli_verify_single_suite(capsys, tmp_path):
    assert main(["verify", "--suite", "liealg", "--out", str(tmp_path)]) == 0
    out, err = capsys.readouterr()
    records = [json.loads(line) for line in out.splitlines()]
    assert records and all(r["suite"] == "liealg" and r["pass"] for r in records)
    assert "# overall: pass" in err
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["pass"] is True
    assert (tmp_path / "records.jsonl").read_text() == out


def test_cli_verify_failure_exit_code(capsys):
    assert main(["verify", "--config", str(CONFIGS / "negative_control.yaml"), "--suite", "liealg",
                 "--suite", "dynrmat"]) == 1
    assert "# dynrmat: fail" in capsys.readouterr().err


def test_cli_config_errors_exit_2(capsys, tmp_path):
    assert main(["verify", "--config", "/nonexistent.yaml"]) == 2
    assert main(["verify", "--config", write_yaml(tmp_path, "rank: 9\n")]) == 2
    assert main(["leaves", "--p", "0.1", "0.2"]) == 2
    assert "dynpg:" in capsys.readouterr().err


def test_cli_calibrate(capsys, tmp_path):
    assert main(["calibrate", "--out", str(tmp_path)]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["dual_embedding_sign"] == -1
    assert json.loads((tmp_path / "calibration.json").read_text()) == printed


@pytest.mark.parametrize("model", ["standard", "additive"])
def test_cli_leaves(capsys, model):
    assert main(["leaves", "--model", model, "--p", "0.1", "--q", "-0.2", "--xi", "0.1", "0.2", "0.3"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["rank_bivector"] == out["rank_orbit"]
    assert len(out["orbit"]) == 3 and out["pass"] is True
