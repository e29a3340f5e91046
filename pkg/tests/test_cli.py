import csv
import json
import math

import pytest

from spinsemi import cli
from spinsemi.cli import ConfigError, RunConfig, load_config, main, parse_complex, parse_tau, tau_label
from spinsemi.quantum import exact_entropy


def write_config(tmp_path, **data):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_parse_complex_forms():
    assert parse_complex(1) == 1
    assert parse_complex("0.5+0.2j") == 0.5 + 0.2j
    assert parse_complex({"re": 0.3, "im": -1}) == 0.3 - 1j
    assert parse_complex([0.3, 2]) == 0.3 + 2j
    with pytest.raises(ConfigError):
        parse_complex("abc")
    assert parse_tau("0.0354i") == 0.0354j
    assert tau_label(0.5) == "0.5" and tau_label(0.1 + 0.2j) == "0.1+0.2i"


def test_config_round_trip():
    cfg = RunConfig(j=2.5, s0A=0.4 + 0.1j, tau_steps=11)
    assert RunConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("data", [
    {"j": 1.3},
    {"lambda": 0},
    {"tauMin": 0.5, "tauMax": 0.2},
    {"tauSteps": 1},
    {"tauSteps": 10.5},
    {"seedPolicy": "random"},
    {"colour": "blue"},
    {"filters": {"maxValue": -1}},
    {"filters": {"speed": 1}},
    {"s0A": "one"},
])
def test_bad_config_exit_code(tmp_path, data):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(data)
    assert main(["quantum", "--config", write_config(tmp_path, **data), "--out", str(tmp_path)]) == 2


def test_unreadable_config(tmp_path):
    assert main(["quantum", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["quantum", "--config", str(bad)]) == 2
    with pytest.raises(ConfigError):
        load_config(str(bad))


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    def boom(config):
        raise ArithmeticError("synthetic failure")

    monkeypatch.setattr(cli, "cmd_quantum", boom)
    assert main(["quantum", "--out", str(tmp_path)]) == 3
    report = json.loads((tmp_path / "error.json").read_text())
    assert report["error"] == "ArithmeticError"


def test_quantum_csv(tmp_path, params):
    assert main(["quantum", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "quantum_entropy.csv")
    assert rows[0] == ["tau", "S_exact"]
    assert len(rows) == 102
    assert float(rows[1][0]) == 0 and abs(float(rows[1][1])) < 1e-12
    assert float(rows[-1][0]) == 1 and abs(float(rows[-1][1])) < 1e-12
    for t, s in rows[1::10]:
        assert float(s) == pytest.approx(exact_entropy(params, float(t)), abs=1e-14)


def test_semiclassical_outputs(tmp_path):
    cfg = write_config(tmp_path, tauMin=0.01, tauMax=0.05, tauSteps=5)
    assert main(["semiclassical", "--config", cfg, "--out", str(tmp_path), "--policy", "real-only"]) == 0
    rows = read_csv(tmp_path / "semiclassical_entropy.csv")
    assert rows[0] == ["tau", "S_sc", "S_exact", "nSetsActive"]
    for _, s, e, n in rows[1:]:
        assert abs(float(s) - float(e)) < 0.0073 + 1e-3
        assert n == "1"
    doc = json.loads((tmp_path / "branches.json").read_text())
    assert doc["seedPolicy"] == "real-only"
    assert [b["branchId"] for b in doc["branches"]] == ["real"]
    assert len(doc["branches"][0]["tau"]) == 5


def test_rootmap_sections(tmp_path):
    cfg = write_config(tmp_path, mapResolution=20, gridResolution=200)
    assert main(["rootmap", "--tau", "0.3", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "rootmap_0.3.csv")
    assert rows[0] == ["# section: grid"] and rows[1] == ["re_x", "im_x", "Re_f", "Im_f"]
    split = rows.index(["# section: roots"])
    assert split == 2 + 400
    assert rows[split + 1] == ["re", "im", "converged", "filtered", "kind"]
    roots = rows[split + 2:]
    assert any(r[:2] == ["1", "0"] and r[4] == "real-root" for r in roots)
    assert all(r[2] == "1" for r in roots)
    assert {r[3] for r in roots} <= {"", "negligible", "caustic", "divergent", "non-finite"}


def test_diagnostics_document(tmp_path, params):
    cfg = write_config(tmp_path, tauSteps=11)
    assert main(["diagnostics", "--config", cfg, "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "diagnostics.json").read_text())
    for t, d in zip(doc["tau"], doc["detMstar"]):
        expected = 1 + 20.25 * (2 * math.pi * t) ** 2
        assert complex(d["re"], d["im"]) == pytest.approx(expected, rel=1e-12)
    for d in doc["detM"]:
        assert complex(d["re"], d["im"]) == pytest.approx(1)
    assert doc["maxDetMstarError"] < 1e-9
    assert doc["tauCritical"]["im"] == pytest.approx(1 / (9 * math.pi))
    assert doc["variaS"]["samples"] == 12
    assert doc["variaS"]["maxResidual"] < 1e-6


def test_outputs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = write_config(tmp_path, tauSteps=6, mapResolution=10, gridResolution=100)
    for out in (a, b):
        assert main(["diagnostics", "--config", cfg, "--out", str(out)]) == 0
        assert main(["rootmap", "--tau", "0.2", "--config", cfg, "--out", str(out)]) == 0
    for name in ("diagnostics.json", "rootmap_0.2.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_module_entry_point_help(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    assert "semiclassical" in capsys.readouterr().out
