import csv
import json
import shutil
import subprocess
import sys

import jsonschema
import pytest

from openspin.cli import main
from openspin.reports import ConfigError, RunConfig, load_schema, parse_scalar, set_override

SL2_BLOCKS = {"chain": {"m": 2, "n": 0, "sites": 2, "mode": "open-sp"}, "boundary": {"blocks": [1, 1, 0, 0], "xi": "3/2"}}


def write(tmp_path, data, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def run_cli(tmp_path, task, data, *extra, out="report.json"):
    cfg = write(tmp_path, data)
    target = tmp_path / out
    code = main([task, "--config", cfg, "--out", str(target), *extra])
    report = json.loads(target.read_text()) if target.exists() else None
    return code, report


def check(report, name):
    return next(c for c in report["checks"] if c["name"] == name)


# --------------------------------------------------------------------------
# tasks and exit codes


def test_verify_ybe_exact_zero(tmp_path):
    code, rep = run_cli(tmp_path, "verify-ybe", {"chain": {"m": 2, "n": 1, "sites": 2}})
    assert code == 0 and rep["passed"]
    assert check(rep, "ybe")["value"] == 0 and check(rep, "ybe")["tolerance"] == "exact"
    assert rep["schema_version"] == "1" and rep["task"] == "verify-ybe"


def test_vacuum_check_passes_with_exact_backend(tmp_path):
    code, rep = run_cli(tmp_path, "vacuum-check", SL2_BLOCKS, "--exact")
    assert code == 0
    assert float(check(rep, "pseudo_vacuum")["value"]) < 1e-12
    assert check(rep, "pseudo_vacuum_exact")["passed"]
    assert rep["calibration"]["k_plus"]["choice"] == "identity"


def test_bethe_solve_two_magnons_and_csv(tmp_path):
    data = dict(SL2_BLOCKS, solver={"counts": [[0], [1], [2]]})
    code, rep = run_cli(tmp_path, "bethe-solve", data)
    assert code == 0
    match = rep["results"]["bethe-solve"]["match"]
    assert match["matched"] == match["curves"] == 4
    with open(tmp_path / "report.roots.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["rootset", "level", "index", "re", "im"]
    assert {r["level"] for r in rows} == {"1"}


def test_spectrum_csv_columns(tmp_path):
    code, rep = run_cli(tmp_path, "spectrum", SL2_BLOCKS)
    assert code == 0
    with open(tmp_path / "report.spectrum.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["lambda_re", "lambda_im", "eigenvalue_re", "eigenvalue_im", "curve_id"]
    assert len(rows) == 4 * 8  # four curves at eight default samples


def test_failed_check_exits_one_and_still_writes(tmp_path, capsys):
    broken = {
        "chain": {"m": 3, "n": 0, "sites": 2, "mode": "open-sp"},
        "boundary": {
            "affine": {
                "A": [[{"re": 0, "im": "1/2"}, 0, 0], [0, {"re": 0, "im": "1/2"}, 0], [0, 0, {"re": 0, "im": "3/4"}]],
                "B": [[-1, 0, 0], [0, 1, 0], [0, 0, 1]],
            }
        },
    }
    code, rep = run_cli(tmp_path, "commutation", broken)
    assert code == 1 and rep is not None and not rep["passed"]
    assert "check failed" in capsys.readouterr().err


@pytest.mark.parametrize(
    "data",
    [
        {"chain": {"m": 2, "n": 0}},  # missing sites
        {"chain": {"m": 2, "n": 0, "sites": 2}, "bogus": 1},  # unknown key
        {"chain": {"m": 2, "n": 0, "sites": 2}, "tolerances": {"vacuum": -1}},
        {"chain": {"m": 2, "n": 1, "sites": 2, "theta0": -1}},  # odd dimension
        {"chain": {"m": 2, "n": 0, "sites": 2, "mode": "closed"}},  # vacuum-check needs open
    ],
)
def test_config_errors_exit_two(tmp_path, data):
    code, rep = run_cli(tmp_path, "vacuum-check", data)
    assert code == 2 and rep is None


def test_unreadable_config_exits_two(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["verify-ybe", "--config", str(p)]) == 2
    assert main(["verify-ybe", "--config", str(tmp_path / "missing.json")]) == 2


def test_dimension_cap_exits_three(tmp_path):
    data = {"chain": {"m": 2, "n": 0, "sites": 6, "dimension_cap": 16}}
    code, rep = run_cli(tmp_path, "spectrum", data)
    assert code == 3 and rep is None


def test_set_override_is_echoed(tmp_path):
    code, rep = run_cli(tmp_path, "vacuum-check", SL2_BLOCKS, "--set", "chain.sites=1", "--set", 'boundary.xi="5/2"')
    assert code == 0
    assert rep["config"]["chain"]["sites"] == 1 and rep["config"]["boundary"]["xi"] == "5/2"


def test_repeated_runs_are_identical_modulo_timestamp(tmp_path):
    _, a = run_cli(tmp_path, "spectrum", SL2_BLOCKS, out="a.json")
    _, b = run_cli(tmp_path, "spectrum", SL2_BLOCKS, out="b.json")
    a.pop("timestamp"), b.pop("timestamp")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_stdout_when_no_output_path(tmp_path, capsys):
    cfg = write(tmp_path, {"chain": {"m": 2, "n": 0, "sites": 1}})
    assert main(["verify-ybe", "--config", cfg]) == 0
    assert json.loads(capsys.readouterr().out)["passed"]


@pytest.mark.skipif(shutil.which("openspin") is None, reason="console script not installed")
def test_console_script(tmp_path):
    cfg = write(tmp_path, {"chain": {"m": 2, "n": 0, "sites": 1}})
    proc = subprocess.run(["openspin", "verify-ybe", "--config", cfg], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["passed"]
    bad = subprocess.run([sys.executable, "-m", "openspin.cli", "no-such-task", "--config", cfg], capture_output=True)
    assert bad.returncode == 2


# --------------------------------------------------------------------------
# config helpers


def test_schema_accepts_filled_config():
    cfg = RunConfig.from_dict(SL2_BLOCKS, task="full-report")
    jsonschema.validate(cfg.data, load_schema())
    assert cfg.data["schema_version"] == "1" and cfg.data["seed"] == 0


def test_parse_scalar_forms():
    from fractions import Fraction

    assert parse_scalar(3) == 3
    assert parse_scalar("3/2") == Fraction(3, 2)
    assert parse_scalar({"re": "1/2", "im": -1}) == (Fraction(1, 2), Fraction(-1))
    assert parse_scalar("1/2 + 3*i") == (Fraction(1, 2), Fraction(3))
    with pytest.raises(ConfigError):
        parse_scalar("sqrt(2)")


def test_set_override_paths():
    cfg = {"chain": {"m": 2}}
    set_override(cfg, "chain.sites=3")
    set_override(cfg, "boundary.xi=3/2")
    assert cfg["chain"]["sites"] == 3 and cfg["boundary"]["xi"] == "3/2"
    with pytest.raises(ConfigError):
        set_override(cfg, "no-equals-sign")
