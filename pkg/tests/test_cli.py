import json
import os

import pytest

from fraclap.cli import load_config, main, normalize_config
from fraclap.errors import ConfigParseError


def write_config(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def base_config(**overrides):
    cfg = {
        "space": {"fixture": {"kind": "path", "params": {"n": 8}}},
        "theta": 0.5,
        "seed": 0,
        "experiments": [],
    }
    cfg.update(overrides)
    return cfg


def test_validate_ok(tmp_path, capsys):
    path = write_config(tmp_path, base_config())
    assert main(["validate", "--config", path]) == 0
    out = capsys.readouterr().out
    assert out.startswith("OK")
    normalized = json.loads(out[len("OK") :])
    assert normalized["theta"] == [0.5]
    assert normalized["schema_version"] == 1


def test_unknown_experiment_kind_named(tmp_path):
    path = write_config(
        tmp_path, base_config(experiments=[{"kind": "frobnicate"}])
    )
    with pytest.raises(ConfigParseError) as err:
        load_config(path)
    assert "frobnicate" in str(err.value)
    assert "heat_properties" in str(err.value)  # the valid set is listed


def test_theta_out_of_range_rejected(tmp_path):
    path = write_config(tmp_path, base_config(theta=1.5))
    with pytest.raises(ConfigParseError, match="theta"):
        load_config(path)


def test_random_geometric_missing_seed_named(tmp_path):
    cfg = base_config(
        space={"fixture": {"kind": "random_geometric", "params": {"n": 10, "radius": 0.5}}}
    )
    with pytest.raises(ConfigParseError, match="seed"):
        load_config(write_config(tmp_path, cfg))


def test_malformed_json_reports_location(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{\n  broken\n}")
    with pytest.raises(ConfigParseError, match="bad.json:2"):
        load_config(str(path))


def test_validate_exit_code_on_error(tmp_path, capsys):
    path = write_config(tmp_path, base_config(theta=7))
    assert main(["validate", "--config", path]) == 2
    assert "config error" in capsys.readouterr().err


def test_empty_experiments_runs_clean(tmp_path):
    path = write_config(tmp_path, base_config())
    out = str(tmp_path / "out")
    assert main(["run", "--config", path, "--out", out]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["experiments"] == []
    assert report["summary"] == {"n_experiments": 0, "n_assertive": 0, "n_failed": 0}


def test_run_writes_report_and_csv(tmp_path):
    cfg = base_config(
        experiments=[
            {"kind": "heat_properties", "params": {"ts": [0.1, 1.0]}},
            {"kind": "codim_check", "params": {}},
        ]
    )
    path = write_config(tmp_path, cfg)
    out = str(tmp_path / "out")
    assert main(["run", "--config", path, "--out", out]) == 0
    files = os.listdir(out)
    assert "report.json" in files
    assert "00_heat_properties.csv" in files
    assert "01_codim_check.csv" in files
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert all(rec["passed"] for rec in report["experiments"])


def test_run_deterministic_modulo_metadata(tmp_path):
    cfg = base_config(
        theta=[0.5],
        experiments=[
            {"kind": "energy_comparability", "params": {"family_size": 20}},
            {"kind": "dirichlet_routes", "params": {"m": 16}},
            {"kind": "modulus_check", "params": {"ms": [512, 1024, 2048, 4096]}},
        ],
    )
    path = write_config(tmp_path, cfg)
    reports = []
    for sub in ("a", "b"):
        out = str(tmp_path / sub)
        assert main(["run", "--config", path, "--out", out]) == 0
        obj = json.loads((tmp_path / sub / "report.json").read_text())
        del obj["metadata"]
        reports.append(json.dumps(obj, sort_keys=True))
    assert reports[0] == reports[1]


def test_run_failure_exit_code(tmp_path, capsys):
    # an impossible tolerance forces the assertive experiment to fail
    # (theta != 1/2 so the column program carries genuine discretization error)
    cfg = base_config(
        theta=0.25,
        experiments=[{"kind": "modulus_check", "params": {"tol": 1e-30, "ms": [512, 1024]}}],
    )
    path = write_config(tmp_path, cfg)
    assert main(["run", "--config", path, "--out", str(tmp_path / "out")]) == 1
    assert "failed" in capsys.readouterr().err


def test_seed_override_changes_report(tmp_path):
    cfg = base_config(
        experiments=[{"kind": "energy_comparability", "params": {"family_size": 10}}]
    )
    path = write_config(tmp_path, cfg)
    metrics = []
    for seed, sub in ((0, "s0"), (123, "s123")):
        main(["run", "--config", path, "--out", str(tmp_path / sub), "--seed", str(seed)])
        rep = json.loads((tmp_path / sub / "report.json").read_text())
        metrics.append(rep["experiments"][0]["metrics"]["ratio_max"])
    assert metrics[0] != metrics[1]


def test_inline_space_config(tmp_path):
    cfg = base_config(
        space={
            "dist": [[0, 1], [1, 0]],
            "mu": [1, 1],
            "cond": [[0, 1], [1, 0]],
        },
        experiments=[{"kind": "heat_properties", "params": {"ts": [1.0]}}],
    )
    path = write_config(tmp_path, cfg)
    assert main(["run", "--config", path, "--out", str(tmp_path / "out")]) == 0


def test_normalize_rejects_non_object():
    with pytest.raises(ConfigParseError):
        normalize_config([1, 2, 3])
    with pytest.raises(ConfigParseError, match="space"):
        normalize_config({})


def test_kernel_export_option(tmp_path):
    cfg = base_config(
        experiments=[{"kind": "heat_properties", "params": {"ts": [1.0], "export_kernels": True}}]
    )
    path = write_config(tmp_path, cfg)
    out = tmp_path / "out"
    assert main(["run", "--config", path, "--out", str(out)]) == 0
    assert (out / "00_heat_kernel_t1.0.csv").exists()
