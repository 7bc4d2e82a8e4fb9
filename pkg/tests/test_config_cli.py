import csv
import json

import numpy as np
import pytest

from driven_level.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, INSET_HEADER, SCATTER_HEADER, TRACE_HEADER, main
from driven_level.config import ScenarioConfig, parse_config
from driven_level.errors import ConfigError

MODERATE_INI = """
[model]
v_ac = 1
omega = 0.5

[run]
n_times = 64
"""


def run(tmp_path, command, text=None, *extra):
    out = tmp_path / "out"
    argv = [command, "--out", str(out), *extra]
    if text is not None:
        cfg = tmp_path / "scenario.ini"
        cfg.write_text(text)
        argv += ["--config", str(cfg)]
    return main(argv), out


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float) if len(rows) > 1 else np.empty((0, len(rows[0])))


# --- config parsing ---------------------------------------------------------


def test_defaults_reproduce_slow_scenario():
    cfg = parse_config("")
    assert cfg == ScenarioConfig()
    assert (cfg.model.epsilon0, cfg.model.v_ac, cfg.model.omega) == (-1.2, 10.0, 1e-3)
    assert cfg.amplitudes == (10.0, 12.0)


def test_full_config_parses():
    cfg = parse_config(
        """
[model]
epsilon0 = 0.5
temperature = 0.1
[run]
kind = audit
n_times = 32
threads = 2
amplitudes = 4 5, 6
w_e_path = identity
[quadrature]
order = 20
cutoff =
[truncation]
tol = 1e-9
n_max = 40
[output]
directory = results
format = json
"""
    )
    assert cfg.run == "audit" and cfg.threads == 2 and cfg.amplitudes == (4.0, 5.0, 6.0)
    assert cfg.quadrature.order == 20 and cfg.quadrature.cutoff is None
    assert cfg.truncation.n_max == 40 and cfg.output_format == "json"
    assert str(cfg.output_dir) == "results"


@pytest.mark.parametrize(
    "text",
    [
        "[model]\nbogus = 1\n",
        "[extra]\nx = 1\n",
        "[model]\nomega = fast\n",
        "[model]\ngamma = -1\n",
        "[run]\nkind = plot\n",
        "[run]\nn_times = 4\n",
        "[run]\namplitudes =\n",
        "[run]\namplitudes = 1, -3\n",
        "[quadrature]\nmethod = guess\n",
        "[quadrature]\ncutoff = 5\n",
        "[truncation]\ntol = 0.5\n",
        "[output]\nformat = xml\n",
        "no section header\n",
    ],
)
def test_invalid_config_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


# --- command line -----------------------------------------------------------


def test_trace_outputs(tmp_path):
    code, out = run(tmp_path, "trace", MODERATE_INI)
    assert code == EXIT_OK
    header, data = read_csv(out / "trace.csv")
    assert ",".join(header) == TRACE_HEADER
    assert data.shape == (64, 12)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["averages"]["power"] > 0
    assert {"averages", "max_residual_conservation", "max_residual_reactance", "tail_estimates"} <= set(summary)
    text = (out / "trace.csv").read_text()
    assert "-0," not in text and not text.endswith("-0\n")


def test_undriven_trace_is_zero(tmp_path):
    code, out = run(tmp_path, "trace", "[model]\nv_ac = 0\nomega = 0.5\n[run]\nn_times = 16\n")
    assert code == EXIT_OK
    header, data = read_csv(out / "trace.csv")
    flux_cols = [header.index(c) for c in ("i_c", "w_c", "w_t", "w_d", "w_e", "power", "q_dot", "q_tilde_dot")]
    assert np.max(np.abs(data[:, flux_cols])) < 1e-12


def test_malformed_config_writes_nothing(tmp_path):
    code, out = run(tmp_path, "trace", "[model]\nv_ac = lots\n")
    assert code == EXIT_CONFIG
    assert not out.exists()
    assert main(["trace", "--config", str(tmp_path / "missing.ini"), "--out", str(out)]) == EXIT_CONFIG
    assert main(["unknown-command"]) == EXIT_CONFIG
    assert main(["trace", "--threads", "0", "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()


def test_runs_are_bit_identical(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir()
    b.mkdir()
    run(a, "trace", MODERATE_INI)
    run(b, "trace", MODERATE_INI, "--threads", "3")
    for name in ("trace.csv", "summary.json"):
        assert (a / "out" / name).read_bytes() == (b / "out" / name).read_bytes()


def test_json_format(tmp_path):
    code, out = run(tmp_path, "trace", MODERATE_INI, "--format", "json")
    assert code == EXIT_OK
    data = json.loads((out / "trace.json").read_text())
    assert set(data) == set(TRACE_HEADER.split(","))
    assert len(data["i_c"]) == 64


def test_audit_passes_for_moderate_drive(tmp_path):
    code, out = run(tmp_path, "audit", MODERATE_INI)
    report = json.loads((out / "audit.json").read_text())
    assert code == EXIT_OK and report["passed"]
    expected = {
        "conservation",
        "reactance",
        "mean_w_t",
        "mean_q_dot_vs_power",
        "mean_q_dot_vs_q_tilde_dot",
        "unitarity",
        "dual_path_w_c",
        "dual_path_i_c",
    }
    assert set(report["audits"]) == expected
    assert all(a["status"] == "pass" for a in report["audits"].values())


def test_audit_undriven(tmp_path):
    code, out = run(tmp_path, "audit", "[model]\nv_ac = 0\nomega = 0.5\n[run]\nn_times = 16\n")
    report = json.loads((out / "audit.json").read_text())
    assert code == EXIT_OK
    for entry in report["audits"].values():
        assert entry["residual"] <= 1e-12


def test_audit_fails_with_tiny_truncation(tmp_path):
    code, out = run(tmp_path, "audit", MODERATE_INI + "[truncation]\nn_max = 3\n")
    assert code == EXIT_NUMERICAL
    entry = json.loads((out / "audit.json").read_text())["audits"]["unitarity"]
    assert entry["status"] == "fail"
    assert "TruncationUnconverged" in entry["message"]


def test_audit_skips_scattering_for_large_drive(tmp_path):
    code, out = run(tmp_path, "audit", "[run]\nn_times = 64\n")
    audits = json.loads((out / "audit.json").read_text())["audits"]
    assert code == EXIT_OK
    assert audits["unitarity"]["status"] == "skipped"
    assert audits["conservation"]["status"] == "pass"


def test_fig2_single_amplitude(tmp_path):
    code, out = run(tmp_path, "fig2", "[run]\namplitudes = 10\n")
    assert code == EXIT_OK
    header, scatter = read_csv(out / "fig2_scatter.csv")
    assert ",".join(header) == SCATTER_HEADER
    assert set(scatter[:, 3]) == {10.0}
    header, inset = read_csv(out / "fig2_inset.csv")
    assert ",".join(header) == INSET_HEADER
    fit = json.loads((out / "fit.json").read_text())
    assert list(fit["branches"]) == ["10"]
    assert abs(fit["branches"]["10"]["slope"] - np.pi) / np.pi < 0.01


def test_adiabatic_outputs(tmp_path):
    code, out = run(tmp_path, "adiabatic", "[run]\nn_times = 64\n")
    assert code == EXIT_OK
    report = json.loads((out / "adiabatic.json").read_text())
    assert abs(report["r_fit"] - np.pi) / np.pi < 0.01
    assert (out / "adiabatic.csv").exists()


def test_numerical_failure_exit_code(tmp_path):
    code, out = run(tmp_path, "trace", MODERATE_INI + "[truncation]\nn_max = 3\n")
    assert code == EXIT_NUMERICAL
    assert not out.exists()


def test_version_flag(capsys):
    assert main(["--version"]) == EXIT_OK


def test_inline_comments_allowed():
    cfg = parse_config("[run]\nw_e_path = identity   ; S matrix off\n[truncation]\nn_max =   ; automatic\n")
    assert cfg.w_e_path == "identity" and cfg.truncation.n_max is None
