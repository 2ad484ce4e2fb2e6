import csv
import json
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from reference import SM, SP, SZ

from pseudomodes.cli import COMMANDS, run
from pseudomodes.config import (
    ConfigError,
    parse_complex,
    parse_model,
    parse_operator,
    parse_request,
    parse_spectral_density,
    parse_state,
    write_json,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run_cli(command, cfg, tmp_path, *extra):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    code = run([command, "--config", str(cfg_path), "--output", str(out), *extra])
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, report, out


def load(name):
    return json.loads((CONFIGS / f"{name}.json").read_text())


# parsing


def test_parse_operator_forms():
    assert np.array_equal(parse_operator("pauli_z", 2, "x"), SZ)
    assert np.array_equal(parse_operator({"name": "pauli_z", "scale": 0.5}, 2, "x"), 0.5 * SZ)
    assert np.array_equal(parse_operator({"sum": ["sigma_plus", "sigma_minus"]}, 2, "x"), SP + SM)
    m = parse_operator([[1, [0, 2]], [[0, -2], 3]], 2, "x")
    assert m[0, 1] == 2j and m[1, 0] == -2j
    with pytest.raises(ConfigError, match="unknown operator"):
        parse_operator("pauli_w", 2, "x")
    with pytest.raises(ConfigError, match="shape"):
        parse_operator([[1, 0]], 2, "x")


def test_parse_complex_and_state():
    assert parse_complex([1, 2], "z") == 1 + 2j
    with pytest.raises(ConfigError):
        parse_complex("1+2j", "z")
    rho = parse_state({"pure": [1, 1]}, 2, "psi")
    assert np.allclose(rho, 0.5 * np.ones((2, 2)))
    with pytest.raises(ConfigError):
        parse_state({"pure": [0, 0]}, 2, "psi")


def test_parse_model_roundtrip():
    m = parse_model(load("simulate"))
    assert m.layout.labels == ["S", "B0"]
    assert m.bath.coupling(1)[0] == 0.15j


def test_missing_modes_key_names_it():
    cfg = load("simulate")
    del cfg["modes"]
    with pytest.raises(ConfigError, match="'modes'"):
        parse_model(cfg)


def test_invalid_values_become_config_errors():
    cfg = load("simulate")
    cfg["modes"][0]["gamma"] = -1.0
    with pytest.raises(ConfigError, match="modes\\[0\\]"):
        parse_model(cfg)
    with pytest.raises(ConfigError):
        parse_spectral_density({"kind": "lorentzian", "amplitude": 1, "center": 0})
    with pytest.raises(ConfigError):
        parse_spectral_density({"kind": "gaussian"})


def test_tabulated_csv_relative_to_config(tmp_path):
    (tmp_path / "j.csv").write_text("0,0\n1,1\n2,0\n")
    sd = parse_spectral_density({"kind": "tabulated", "csv": "j.csv"}, tmp_path)
    assert sd.frequencies == (0.0, 1.0, 2.0)


def test_request_right_defaults_to_identity():
    req = parse_request({"times": [1.0, 2.0], "left": ["sigma_minus", "sigma_plus"]}, 2)
    assert all(np.array_equal(r, np.eye(2)) for r in req.right_ops)
    with pytest.raises(ConfigError):
        parse_request({"times": [2.0, 1.0], "left": ["identity", "identity"]}, 2)


def test_write_json_is_sorted(tmp_path):
    write_json(tmp_path / "a.json", {"b": 1 + 2j, "a": np.float64(0.5)})
    assert (tmp_path / "a.json").read_text() == '{\n  "a": 0.5,\n  "b": [\n    1.0,\n    2.0\n  ]\n}\n'


# commands


@pytest.mark.parametrize("command", COMMANDS)
def test_shipped_configs_run(command, tmp_path):
    name = command.replace("-", "_")
    shutil.copy(CONFIGS / f"{name}.json", tmp_path / "config.json")
    out = tmp_path / "out"
    code = run([command, "--config", str(tmp_path / "config.json"), "--output", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["command"] == command
    meta = json.loads((out / "run_metadata.json").read_text())
    assert {"timestamp", "version", "numpy", "scipy"} <= set(meta)


def test_identity_batch_gives_one(tmp_path):
    cfg = load("multitime")
    cfg["requests"] = [{"times": [0.5, 1.0, 2.0], "left": ["identity"] * 3}]
    code, report, out = run_cli("multitime", cfg, tmp_path)
    assert code == 0
    re, im = report["result"]["values"][0]
    assert abs(re - 1) < 1e-12 and abs(im) < 1e-12
    rows = list(csv.reader((out / "multitime.csv").open()))
    assert rows[0] == ["index", "re", "im"] and float(rows[1][1]) == pytest.approx(1.0, abs=1e-12)


def test_missing_key_exit_code_and_message(tmp_path, capsys):
    cfg = load("simulate")
    del cfg["modes"]
    code, report, _ = run_cli("simulate", cfg, tmp_path)
    assert code == 1 and report is None
    assert "'modes'" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert run(["simulate", "--config", str(tmp_path / "nope.json"), "--output", str(tmp_path)]) == 1
    assert "not found" in capsys.readouterr().err


def test_failed_check_exits_two(tmp_path):
    cfg = load("wick_check")
    cfg["modes"][0]["n_max"] = 2  # too small for four insertions
    cfg["tolerance"] = 1e-8
    code, report, _ = run_cli("wick-check", cfg, tmp_path)
    assert code == 2
    assert report["result"]["passed"] is False


def test_reports_are_deterministic(tmp_path):
    cfg = load("verify_theorem")
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir()
    b.mkdir()
    run_cli("verify-theorem", cfg, a)
    run_cli("verify-theorem", cfg, b)
    assert (a / "out" / "report.json").read_bytes() == (b / "out" / "report.json").read_bytes()


def test_threads_do_not_change_results(tmp_path):
    cfg = load("multitime")
    one = tmp_path / "one"
    four = tmp_path / "four"
    one.mkdir()
    four.mkdir()
    run_cli("multitime", cfg, one)
    run_cli("multitime", cfg, four, "--threads", "4")
    ra = json.loads((one / "out" / "report.json").read_text())["result"]
    rb = json.loads((four / "out" / "report.json").read_text())["result"]
    assert ra == rb


def test_wick_seed_recorded(tmp_path):
    code, report, _ = run_cli("wick-check", load("wick_check"), tmp_path, "--seed", "7")
    assert code == 0 and report["result"]["seed"] == 7


def test_console_script(tmp_path):
    exe = shutil.which("pseudomodes")
    if exe is None:
        pytest.skip("console script not installed")
    proc = subprocess.run([exe, "fit-bath", "--config", str(CONFIGS / "fit_bath.json"), "--output", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "passed" in proc.stdout
