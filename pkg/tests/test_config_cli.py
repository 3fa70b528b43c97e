import csv
import json
import os

import pytest

from cocycle_lab.acceptance import CheckResult
from cocycle_lab.cli import exit_status, main
from cocycle_lab.config import load_config
from cocycle_lab.errors import ConfigError

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")

SMALL = {
    "seed": 3,
    "spectrum": {"samples": 2, "n_iters": 10000},
    "livsic": {"n_max": 4, "n_points": 20000, "extend_samples": 3},
    "holonomy": {"pairs": 10, "chains": 5, "pair_budget": 2000},
}


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_defaults_fill_in():
    cfg = load_config({"seed": 1})
    assert cfg["lyapnorm"]["truncation"] == 200
    assert cfg["livsic"]["tolerance"] == 1e-8
    assert cfg["verify"]["expected_fail"] == []
    json.dumps(cfg)


def test_shipped_configs_validate():
    for name in sorted(os.listdir(CONFIGS)):
        load_config(os.path.join(CONFIGS, name))


@pytest.mark.parametrize("cfg,fragment", [
    ({"seed": 1, "livsic": {"n_pointz": 5}}, "livsic.n_pointz"),
    ({"seed": 1, "bogus": 1}, "bogus"),
    ({}, "seed"),
    ({"seed": 1, "livsic": {"tolerance": 0}}, "livsic.tolerance"),
    ({"seed": 1, "livsic": {"tolerance": -1e-8}}, "livsic.tolerance"),
    ({"seed": -1}, "seed"),
    ({"seed": 1, "verify": {"expected_fail": ["nope"]}}, "nope"),
])
def test_config_errors_name_the_key(cfg, fragment):
    with pytest.raises(ConfigError, match=fragment.replace(".", r"\.")):
        load_config(cfg)


def test_cli_config_error_exit_code(tmp_path, capsys):
    p = write_cfg(tmp_path, {"seed": 1, "livsic": {"n_pointz": 5}})
    assert main(["obstructions", "--config", p, "--out", str(tmp_path / "o")]) == 2
    assert "livsic.n_pointz" in capsys.readouterr().err


def test_seed_override():
    assert load_config({"seed": 1}, seed=99)["seed"] == 99


def test_exit_status_rules():
    p = CheckResult("a", "pass", {})
    f = CheckResult("b", "fail", {})
    s = CheckResult("c", "skipped", {})
    assert exit_status([p, s], []) == 0
    assert exit_status([p, f], []) == 1
    assert exit_status([p, f], ["b"]) == 0
    assert exit_status([p, f], ["a", "b"]) == 1


def test_negative_control_exit_codes(tmp_path):
    cfg = json.load(open(os.path.join(CONFIGS, "negative_diag.json")))
    cfg["output"]["directory"] = str(tmp_path / "a")
    assert main(["verify", "--config", write_cfg(tmp_path, cfg)]) == 0
    cfg["verify"]["expected_fail"] = []
    cfg["output"]["directory"] = str(tmp_path / "b")
    assert main(["verify", "--config", write_cfg(tmp_path, cfg, "b.json")]) == 1
    rep = json.load(open(tmp_path / "b" / "report.json"))
    status = {c["name"]: c["status"] for c in rep["checks"]}
    assert status["zero_exponents"] == "fail" and status["transfer_uniqueness"] == "skipped"


def test_obstructions_golden(tmp_path):
    p = write_cfg(tmp_path, dict(SMALL, livsic={"n_max": 3}))
    assert main(["obstructions", "--config", p, "--out", str(tmp_path)]) == 0
    raw = (tmp_path / "obstructions.csv").read_bytes()
    assert b"\r" not in raw
    rows = list(csv.DictReader(raw.decode().splitlines()))
    assert list(rows[0]) == ["period", "point_0", "point_1", "defect"]
    assert len(rows) == 1 + 5 + 16
    by_period = {}
    for r in rows:
        by_period[int(r["period"])] = by_period.get(int(r["period"]), 0) + 1
        assert float(r["defect"]) <= 1e-10
    assert by_period == {1: 1, 2: 5, 3: 16}
    rep = json.load(open(tmp_path / "report.json"))
    assert rep["config"]["livsic"]["n_max"] == 3
    assert "seconds" not in json.dumps(rep)


def _run_twice(tmp_path, command):
    p = write_cfg(tmp_path, SMALL)
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main([command, "--config", p, "--out", str(out), "--threads", str(k + 1)]) == 0
        outs.append(out)
    return outs


@pytest.mark.parametrize("command", ["spectrum", "transfer"])
def test_deterministic_outputs(tmp_path, command):
    a, b = _run_twice(tmp_path, command)
    for name in ("report.json", f"{command}.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_spectrum_csv_content(tmp_path):
    p = write_cfg(tmp_path, SMALL)
    assert main(["spectrum", "--config", p, "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "spectrum.csv", newline="")))
    assert {r["converged"] for r in rows} <= {"true", "false"}
    assert all(abs(float(r["exponent"])) <= 1e-3 for r in rows)
    timings = json.load(open(tmp_path / "timings.json"))
    assert timings["seconds"]["total"] > 0
