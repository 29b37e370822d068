import csv
import json

import pytest

from tenscov import __version__
from tenscov.cli import ExperimentConfig, main
from tenscov.errors import ParameterError


def read_csv(path):
    lines = path.read_text().splitlines()
    body = [l for l in lines if not l.startswith("#")]
    meta = dict(l[2:].split("=", 1) for l in lines if l.startswith("#"))
    return list(csv.reader(body)), meta


def write_config(tmp_path, data):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return str(p)


def test_sinc_subcommand(tmp_path):
    cfg = write_config(tmp_path, {"grid": {"dim": 3, "half_widths": 1.0, "points_per_axis": 9}, "Ms": [8, 16]})
    assert main(["sinc", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rows, meta = read_csv(tmp_path / "o" / "sinc_convergence.csv")
    assert rows[0] == ["M", "rank", "max_error", "fro_error"]
    assert [r[0] for r in rows[1:]] == ["8", "16"]
    assert float(rows[2][2]) < float(rows[1][2])
    assert meta["version"] == __version__ and meta["scenario"] == "SincConvergence"
    assert len(meta["config_sha256"]) == 64


def test_approximate_and_decompose(tmp_path):
    cfg = write_config(tmp_path, {"grid": {"dim": 3, "half_widths": 1.0, "points_per_axis": 9}, "ranks": [1, 3]})
    assert main(["approximate", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    rows, _ = read_csv(tmp_path / "a" / "tucker_convergence.csv")
    assert float(rows[2][2]) < float(rows[1][2])
    assert main(["decompose", "--config", cfg, "--out", str(tmp_path / "d")]) == 0
    rows, _ = read_csv(tmp_path / "d" / "origin_error.csv")
    assert rows[0] == ["n", "rank", "abs_error"]


def test_krige_with_oracle(tmp_path):
    cfg = write_config(tmp_path, {"grid": {"dim": 3, "half_widths": 1.0, "points_per_axis": 5},
                                  "noise_variance": 0.01})
    assert main(["krige", "--config", cfg, "--out", str(tmp_path / "k"), "--tol", "1e-9"]) == 0
    rows, meta = read_csv(tmp_path / "k" / "kriging.csv")
    vals = {r[0]: r[1] for r in rows[1:]}
    assert float(vals["oracle_estimate_error"]) < 1e-6
    assert float(vals["oracle_conditional_error"]) < 1e-6


def test_loglik_and_bench(tmp_path):
    assert main(["loglik", "--out", str(tmp_path / "l")]) == 0
    rows, _ = read_csv(tmp_path / "l" / "likelihood.csv")
    vals = {r[0]: r[1] for r in rows[1:]}
    assert float(vals["oracle_abs_error"]) < 1e-8
    cfg = write_config(tmp_path, {"trace_dims": [3, 50], "trace_sizes": [20], "trace_rank": 2})
    assert main(["bench", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    rows, _ = read_csv(tmp_path / "b" / "trace_scaling.csv")
    assert len(rows) == 3 and all(float(r[5]) < 1e-12 for r in rows[1:])
    assert (tmp_path / "b" / "trace_scaling_timing.csv").exists()


def test_run_is_deterministic(tmp_path):
    data = {"scenario": "Kriging", "kernel": {"family": "Matern", "nu": 0.5, "ell": 0.5},
            "grid": {"dim": 2, "half_widths": 1.0, "points_per_axis": 6}, "Ms": [24], "seed": 7}
    cfg = write_config(tmp_path, data)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "r1")]) == 0
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "r2"), "--threads", "1"]) == 0
    a = (tmp_path / "r1" / "kriging.csv").read_bytes()
    assert a == (tmp_path / "r2" / "kriging.csv").read_bytes()
    assert b"\r\n" not in a


def test_skipped_oracle(tmp_path):
    cfg = write_config(tmp_path, {"grid": {"dim": 2, "half_widths": 1.0, "points_per_axis": 70}})
    assert main(["loglik", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    rows, _ = read_csv(tmp_path / "s" / "likelihood.csv")
    assert rows[-1][0] == "SKIPPED-oracle"


def test_exit_codes(tmp_path, capsys):
    assert main(["sinc", "--config", write_config(tmp_path, {"colour": 1})]) == 2
    assert main(["run", "--config", write_config(tmp_path, {})]) == 2
    assert main(["sinc", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["sinc", "--threads", "0", "--out", str(tmp_path)]) == 2
    assert main(["nonsense"]) == 2
    bad = write_config(tmp_path, {"kernel": {"family": "Matern", "nu": 1.5},
                                  "grid": {"dim": 3, "half_widths": 1.0, "points_per_axis": 9}})
    assert main(["sinc", "--config", bad, "--out", str(tmp_path / "u")]) == 2
    # a smooth kernel on a fine grid has numerically singular factors
    singular = write_config(tmp_path, {"kernel": {"family": "Gaussian"},
                                       "grid": {"dim": 2, "half_widths": 1.0, "points_per_axis": 40}})
    assert main(["loglik", "--config", singular, "--out", str(tmp_path / "w")]) == 3
    big = write_config(tmp_path, {"grid": {"dim": 3, "half_widths": 1.0, "points_per_axis": 600}, "ranks": [1]})
    assert main(["approximate", "--config", big, "--out", str(tmp_path / "v")]) == 4
    assert "error:" in capsys.readouterr().err


def test_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("TENSCOV_THREADS", "x")
    assert main(["loglik", "--out", str(tmp_path)]) == 2
    monkeypatch.setenv("TENSCOV_THREADS", "1")
    assert main(["loglik", "--out", str(tmp_path)]) == 0


def test_config_validation():
    with pytest.raises(ParameterError):
        ExperimentConfig(scenario="Nope")
    with pytest.raises(ParameterError):
        ExperimentConfig(scenario="Kriging", seed=-1)
    a = ExperimentConfig(scenario="Kriging", output="x")
    b = ExperimentConfig(scenario="Kriging", output="y")
    assert a.hash() == b.hash()
    assert a.hash() != ExperimentConfig(scenario="Kriging", seed=1).hash()
