import csv
import json
import math

import numpy as np
import pytest

from manifoldsteer.cli import main
from manifoldsteer.gridio import read_sampled_field


def _run(tmp_path, command, cfg, out="out", extra=()):
    path = tmp_path / f"{command}.json"
    path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    return main([command, "--config", str(path), "--out", str(tmp_path / out), "--workers", "1", *extra])


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_saddle(tmp_path):
    assert _run(tmp_path, "saddle", {"schema_version": 1, "field": {"kind": "taylor_green"}, "guess": [0.9, 0.9]}) == 0
    s = json.loads((tmp_path / "out" / "saddle.json").read_text())
    np.testing.assert_allclose(s["a"], [1, 1], atol=1e-12)
    assert s["lambda_u"] == pytest.approx(math.pi ** 2) and s["residual"] < 1e-12


def test_manifold_unperturbed_is_zero(tmp_path):
    cfg = {"schema_version": 1, "field": {"kind": "taylor_green"}, "times": [-0.5, 0.0, 0.5], "T": 1.0}
    assert _run(tmp_path, "manifold", cfg) == 0
    for r in _rows(tmp_path / "out" / "manifold.csv"):
        for k in ("alpha_s", "alpha_u", "theta_s", "theta_u"):
            assert float(r[k]) == 0.0


def test_manifold_periodic_matches_closed_form(tmp_path):
    cfg = {"schema_version": 1, "field": {"kind": "periodic", "delta": 0.2, "T": 2.0},
           "times": {"start": -1, "stop": 1, "num": 11}, "T": 2.0}
    assert _run(tmp_path, "manifold", cfg) == 0
    for r in _rows(tmp_path / "out" / "manifold.csv"):
        t = float(r["t"])
        want = 0.2 * math.cos(2 * math.pi * t) - 0.2 * math.exp(-2 * math.pi ** 2 * (2 - t)) * math.cos(4 * math.pi)
        assert float(r["theta_s"]) == pytest.approx(want, abs=1e-6)


def test_manifold_time_outside_window_is_config_error(tmp_path):
    cfg = {"schema_version": 1, "field": {"kind": "taylor_green"}, "times": [3.0], "T": 1.0}
    assert _run(tmp_path, "manifold", cfg) == 2


def test_control_zero_program(tmp_path):
    cfg = {"schema_version": 1, "program": {"kind": "zero", "delta": 0.2, "T": 1.0},
           "grid": {"nx": 9, "ny": 5}, "times": [-0.5, 0.5], "bound_samples": 11}
    assert _run(tmp_path, "control", cfg) == 0
    sf = read_sampled_field(tmp_path / "out" / "control.json")
    assert sf.values.shape == (2, 5, 9, 2) and np.all(sf.values == 0.0)
    rep = json.loads((tmp_path / "out" / "control_report.json").read_text())
    assert rep["spikes"] is False


def test_decompose_periodic_synthetic(tmp_path):
    cfg = {"schema_version": 1, "field": {"kind": "periodic", "delta": 0.05, "T": 1.0},
           "grid": {"nx": 21, "ny": 11}, "times": {"start": -1, "stop": 1, "num": 21}}
    assert _run(tmp_path, "decompose", cfg) == 0
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert 0 < rep["ratio"] < 0.5 and rep["valid"] and rep["rule"] == "simpson"
    f = read_sampled_field(tmp_path / "out" / "f.json")
    g = read_sampled_field(tmp_path / "out" / "g.json")
    assert f.values.shape == (1, 11, 21, 2) and g.values.shape == (21, 11, 21, 2)
    # the written remainder reads back as a sampled field
    cfg2 = {"schema_version": 1, "field": {"kind": "sampled", "path": str(tmp_path / "out" / "g.json")}}
    assert _run(tmp_path, "saddle", cfg2, out="o2") == 1  # zero-mean remainder has no steady part


def test_experiment_outputs_are_deterministic(tmp_path):
    cfg = {"schema_version": 1, "experiment": "periodic",
           "params": {"T": 1.0, "slices": [0.0, 0.5], "grid": {"nx": 101, "ny": 51}}}
    assert _run(tmp_path, "experiment", cfg, out="a") == 0
    assert _run(tmp_path, "experiment", cfg, out="b") == 0
    for name in ("periodic.csv", "periodic.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = _rows(tmp_path / "a" / "periodic.csv")
    assert [float(r["t"]) for r in rows] == [0.0, 0.5]
    summary = json.loads((tmp_path / "a" / "periodic.json").read_text())["summary"]
    assert "max_theta_error" in summary


@pytest.mark.parametrize("cfg", [
    "{not json",
    json.dumps({"schema_version": 2, "experiment": "periodic"}),
    json.dumps({"schema_version": 1, "experiment": "nope"}),
    json.dumps({"schema_version": 1, "experiment": "periodic", "params": {"threshold": 1.5}}),
    json.dumps([1, 2]),
])
def test_bad_configs_exit_2(tmp_path, cfg):
    assert _run(tmp_path, "experiment", cfg) == 2


def test_bad_field_and_missing_keys_exit_2(tmp_path):
    assert _run(tmp_path, "saddle", {"schema_version": 1, "field": {"kind": "vortex"}}) == 2
    assert _run(tmp_path, "saddle", {"schema_version": 1}) == 2
    assert main(["frobnicate", "--config", "x.json"]) == 2
    assert _run(tmp_path, "saddle", {"schema_version": 1, "field": {"kind": "taylor_green"}}, extra=("--workers", "0")) == 2


def test_numerical_failure_exits_1(tmp_path):
    cfg = {"schema_version": 1, "field": {"kind": "linear", "matrix": [[-1, 0], [0, -2]]}, "guess": [0.1, 0.1]}
    assert _run(tmp_path, "saddle", cfg) == 1
