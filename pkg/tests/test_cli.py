from __future__ import annotations

import csv
import json

import pytest

from spinres.cli import CSV_HEADER, ConfigError, main, parse_config_text
from spinres.model import ModelParams
from spinres.multiscale import RunOptions


def _write(tmp_path, text: str, name: str = "c.cfg"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_empty_config_gives_defaults():
    cfg = parse_config_text("# nothing\n\n")
    assert cfg.params == ModelParams()
    assert cfg.options == RunOptions()


def test_config_errors():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("g = 0.1\nnot a pair\n")
    with pytest.raises(ConfigError, match="unknown keys: bogus"):
        parse_config_text("bogus = 1\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("g = 0.1\ng = 0.2\n")
    with pytest.raises(ConfigError, match="vartheta"):
        parse_config_text("vartheta = 0.6\n")
    with pytest.raises(ConfigError, match="line 1: n_scales expects int"):
        parse_config_text("n_scales = two\n")
    with pytest.raises(ConfigError, match="validation"):
        parse_config_text("policy = lenient\n")


def test_threads_only_from_environment(monkeypatch):
    monkeypatch.setenv("SPINRES_THREADS", "3")
    assert parse_config_text("").options.threads == 3
    with pytest.raises(ConfigError):
        parse_config_text("threads = 2\n")


def test_check_params_exit_codes(configs, tmp_path):
    assert main(["check-params", str(configs / "deep.cfg")]) == 0
    text = (configs / "deep.cfg").read_text().replace("gamma = 2e-15", "gamma = 0.0016")
    assert main(["check-params", str(_write(tmp_path, text))]) == 2


def test_config_error_exit_code(tmp_path):
    assert main(["check-params", str(_write(tmp_path, "vartheta = 0.6\n"))]) == 2


def test_run_decoupled_fixture(configs, tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(configs / "trivial.cfg"), "--out", str(out)]) == 0
    with open(out / "scales.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CSV_HEADER
    assert len(rows) == 1 + 7
    for r in rows[2:]:
        assert float(r[CSV_HEADER.index("dE_abs")]) == 0.0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["E_res"] == {"re": 2.0, "im": 0.0}
    assert summary["all_audits_passed"]
    for name, audit in summary["audits"].items():
        assert {"measured", "bound", "passed"} <= set(audit), name


def test_strict_failure_writes_summary(configs, tmp_path):
    text = (configs / "small.cfg").read_text() + "policy = strict\n"
    out = tmp_path / "out"
    assert main(["run", str(_write(tmp_path, text)), "--out", str(out)]) == 2
    assert json.loads((out / "summary.json").read_text())["error"]["kind"] == "audit_failure"


def test_nonconvergence_exit_code(configs, tmp_path):
    text = (configs / "small.cfg").read_text() + "max_nodes = 16\n"
    out = tmp_path / "out"
    assert main(["run", str(_write(tmp_path, text)), "--out", str(out)]) == 3
    assert json.loads((out / "summary.json").read_text())["error"]["kind"] == "non_convergence"


def test_audit_on_saved_state(configs, tmp_path):
    text = (configs / "deep.cfg").read_text().replace("n_scales = 6", "n_scales = 2")
    out = tmp_path / "run"
    assert main(["run", str(_write(tmp_path, text)), "--out", str(out)]) == 0
    assert main(["audit", str(out)]) == 0
    report = json.loads((out / "audit.json").read_text())
    assert report["passed"] and len(report["reproduction"]) == 3
    assert "neumann_1_1" in report["audits"]


def test_oracle_compare(configs, tmp_path):
    assert main(["oracle-compare", str(configs / "small.cfg"), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "oracle.json").read_text())
    assert rep["max_deviation"]["measured"] <= 1e-8 and rep["counts"] == [1, 1, 1]


def test_feshbach_verify(tmp_path):
    cfg = _write(tmp_path, "g = 0.05\nvartheta = 0.4\nlambda_uv = 2.0\nrho0 = 0.3\ngamma = 0.3\n"
                           "n_scales = 1\nmodes_outer = 3\ntotal_cap = 3\n")
    assert main(["feshbach-verify", str(cfg), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "feshbach.json").read_text())
    assert rep["decomposition"]["winner"] == "minus_z"
