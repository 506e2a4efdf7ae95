import json
import subprocess
import sys

import pytest

from clarkedp.cli import main

LOG_CD = {"utility": {"type": "crra", "theta": 1.0},
          "technology": {"type": "cobb_douglas", "a": 0.3, "A": 1.0, "d": 1.0},
          "delta": 0.95, "k0": 1.0}
KINKED = dict(LOG_CD, utility={"type": "kinked", "c_star": 0.5, "slope_hi": 2.0, "slope_lo": 1.0})
AK = dict(LOG_CD, technology={"type": "ak", "A": 0.3, "d": 0.1})


@pytest.fixture
def spec(tmp_path):
    def write(doc, name="model.json"):
        p = tmp_path / name
        p.write_text(json.dumps(doc))
        return str(p)
    return write


def run(capsys, *args):
    code = main([str(a) for a in args])
    return code, capsys.readouterr().out


def files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_solve(spec, tmp_path, capsys):
    out = tmp_path / "solve"
    code, _ = run(capsys, "--command", "solve", "--model", spec(LOG_CD), "--grid", 400,
                  "--tol", 1e-6, "--out", out)
    assert code == 0
    assert set(files(out)) == {"value.csv", "policy.csv", "solve_report.json"}
    lines = (out / "value.csv").read_text().splitlines()
    assert lines[0] == "knot,value,trusted_flag" and len(lines) == 401
    assert (out / "policy.csv").read_text().splitlines()[0] == "knot,policy_1"
    rep = json.loads((out / "solve_report.json").read_text())
    assert rep["wall_time_ms"] is None and rep["sup_residual"] < 2e-6


def test_envelope_auto_points(spec, tmp_path, capsys):
    out = tmp_path / "env"
    code, _ = run(capsys, "--command", "envelope", "--model", spec(LOG_CD), "--grid", 1600,
                  "--points", "auto", "--out", out)
    assert code == 0
    rows = (out / "envelope.csv").read_text().splitlines()
    assert rows[0] == "x_bar,dV_lo,dV_hi,dw_lo,dw_hi,inclusion_ok,h1,h2,h3,h4"
    assert len(rows) == 12
    assert all(r.split(",")[5] == "true" for r in rows[1:])
    assert {"audit.json", "value.csv", "policy.csv", "solve_report.json"} <= set(files(out))


def test_envelope_coarse_grid_fails_verification(spec, tmp_path, capsys):
    code, _ = run(capsys, "--command", "envelope", "--model", spec(LOG_CD), "--grid", 100,
                  "--out", tmp_path / "e")
    assert code == 2


def test_audit_exit_codes(spec, tmp_path, capsys):
    code, _ = run(capsys, "--command", "audit", "--model", spec(KINKED), "--grid", 800,
                  "--points", "0.15,0.2,0.9", "--out", tmp_path / "a0")
    assert code == 0
    # consumption pinned at the utility kink: w is not regular there
    code, _ = run(capsys, "--command", "audit", "--model", spec(KINKED), "--grid", 800,
                  "--points", "0.5", "--out", tmp_path / "a2")
    assert code == 2
    doc = json.loads((tmp_path / "a2" / "audit.json").read_text())
    assert doc["points"][0]["h3_regular"]["ok"] is False


def test_audit_ak_no_compact_bound(spec, tmp_path, capsys):
    code, out = run(capsys, "--command", "audit", "--model", spec(AK), "--out", tmp_path / "x")
    assert code == 1
    assert json.loads(out)["error"] == "NoCompactBound"


def test_clarke(spec, tmp_path, capsys):
    out = tmp_path / "c"
    code, _ = run(capsys, "--command", "clarke", "--model", spec(LOG_CD), "--grid", 400,
                  "--points", "0.5,0.9", "--out", out)
    assert code == 0
    assert set(files(out)) == {"clarke.csv"}
    rows = (out / "clarke.csv").read_text().splitlines()
    assert rows[0] == "x_bar,direction,scale_index,t,sup_quotient,inf_quotient"
    # a probe whose sampling window leaves the grid fails verification
    code, _ = run(capsys, "--command", "clarke", "--model", spec(LOG_CD), "--grid", 400,
                  "--points", "0.0211", "--out", tmp_path / "c2")
    assert code == 2


def test_oracle(spec, tmp_path, capsys):
    out = tmp_path / "o"
    code, _ = run(capsys, "--command", "oracle", "--model", spec(LOG_CD), "--grid", 200,
                  "--points", "0.2,0.4,0.6,0.8,1.0", "--out", out)
    assert code == 0
    doc = json.loads((out / "oracle.json").read_text())
    assert len(doc["points"]) == 5 and all(p["ok"] for p in doc["points"])
    # a solve stopped far from the fixed point violates the sandwich
    code, _ = run(capsys, "--command", "oracle", "--model", spec(LOG_CD), "--grid", 200,
                  "--tol", 50, "--points", "0.5", "--out", tmp_path / "o2")
    assert code == 2


@pytest.mark.parametrize("args,err", [
    (["--grid", "8"], "ConfigError"),
    (["--tol", "0"], "ConfigError"),
    (["--points", "1.5"], "ConfigError"),
    (["--points", "a,b"], "ConfigError"),
])
def test_config_errors(spec, tmp_path, capsys, args, err):
    code, out = run(capsys, "--command", "solve", "--model", spec(LOG_CD), "--out",
                    tmp_path / "z", *args)
    assert code == 1 and json.loads(out)["error"] == err


def test_schema_errors(spec, tmp_path, capsys):
    bad = dict(LOG_CD, unknown=1)
    code, out = run(capsys, "--command", "solve", "--model", spec(bad), "--out", tmp_path / "s")
    assert code == 1 and json.loads(out)["error"] == "SchemaError"
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    code, out = run(capsys, "--command", "solve", "--model", p, "--out", tmp_path / "s")
    assert code == 1 and json.loads(out)["error"] == "SchemaError"
    code, out = run(capsys, "--command", "solve", "--model", tmp_path / "missing.json",
                    "--out", tmp_path / "s")
    assert code == 1 and json.loads(out)["error"] == "FileNotFoundError"


@pytest.mark.parametrize("command", ["solve", "envelope", "audit", "clarke", "oracle"])
def test_determinism(spec, tmp_path, capsys, command):
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}"
        code, _ = run(capsys, "--command", command, "--model", spec(KINKED), "--grid", 200,
                      "--points", "0.3,0.7", "--seed", 5, "--out", out)
        outs.append((code, files(out)))
    assert outs[0] == outs[1]


def test_module_entry_point(spec, tmp_path):
    res = subprocess.run([sys.executable, "-m", "clarkedp", "--command", "solve", "--model",
                          spec(AK), "--out", str(tmp_path / "m")], capture_output=True, text=True)
    assert res.returncode == 1
    assert json.loads(res.stdout) == {"error": "NoCompactBound", "message": json.loads(res.stdout)["message"]}
