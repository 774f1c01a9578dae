import json
import math

import pytest

nlspec = pytest.importorskip("nlspec")


def test_presets_listed():
    names = nlspec.preset_names()
    assert "SCEN-A" in names
    assert "Z-(i)" in names


def test_spectrum_of_the_constant_kernel_scenario():
    out = nlspec.spectrum("SCEN-A", n=60, steps=64)
    assert abs(out["s"] - 1.0) < 1e-6
    assert out["converged"]
    assert out["is_principal_eigenvalue"]


def test_inline_scenario_spectrum():
    scenario = json.dumps(
        {
            "l": 1,
            "dim": 1,
            "bounds": [[0, 1]],
            "D": [["1"]],
            "A": [["0"]],
            "kernels": [{"type": "constant", "value": 1.0}],
        }
    )
    out = nlspec.spectrum(scenario, n=50, steps=64)
    assert abs(out["s"] - 1.0) < 1e-6


def test_existence_criteria():
    rep = nlspec.existence("SCEN-A", n=50, steps=64)
    assert rep["criterion_i"]
    assert rep["is_principal_eigenvalue"]


def test_local_limit_value():
    lam = nlspec.lambda_local("SCEN-E", n=100, steps=64)
    assert abs(lam + math.pi**2) < 0.05


def test_run_writes_artifacts(tmp_path):
    cfg = json.dumps({"command": "spectrum", "scenario": "SCEN-A", "n": 40, "steps": 64})
    rc = nlspec.run(cfg, str(tmp_path / "out"))
    assert rc == 0
    results = json.loads((tmp_path / "out" / "results.json").read_text())
    assert 0.999999 <= results["spectrum"]["s"] <= 1.000001
    rc2 = nlspec.run(cfg, str(tmp_path / "out2"))
    assert rc2 == 0
    assert (tmp_path / "out" / "results.json").read_text() == (
        tmp_path / "out2" / "results.json"
    ).read_text()


def test_sweep_rate_limit():
    sw = nlspec.sweep_rate("SCEN-F", [1e-3], n=80, steps=64)
    assert abs(sw["rows"][0]["s"] - sw["predicted_limit"]) < 0.05
