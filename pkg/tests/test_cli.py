import json

import numpy as np
import pytest

from degcascade.cli import main
from degcascade.config import ConfigError, ExperimentConfig
from degcascade.mesh import field_from_csv

SMALL = """seed: 3
grid: {T: 2.0, A: 1.0, Na: 10, Nx: 12}
carleman: {members: 2, s: [1.0, 2.0]}
observability: {members: 2}
adjoint: {trials: 2}
"""


def write(tmp_path, text, name="c.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.mark.parametrize("cmd", ["classify", "simulate", "adjoint", "carleman", "observability", "hum"])
def test_commands_and_manifest(tmp_path, cmd):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "out"
    assert main([cmd, "--config", str(cfg), "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 3 and man["command"] == cmd
    assert man["grid"]["Na"] == 10 and man["csv_schema_version"] == 1
    for key in ("python", "numpy", "scipy", "package"):
        assert key in man["versions"]
    assert man["files"] and all((out / f).exists() for f in man["files"])
    assert man["config_sha256"] == ExperimentConfig.load(cfg).sha256


def test_simulate_zero_data(tmp_path):
    cfg = write(tmp_path, SMALL + "initial: {u0: {kind: zero}, v0: {kind: zero}}\n"
                "simulate: {dump_trajectory: true}\n")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--strict"]) == 0
    grid = ExperimentConfig.load(cfg).grid()
    for name in ("u_trajectory.csv", "v_trajectory.csv", "u_final.csv"):
        assert not np.any(field_from_csv(out / name, grid))


def test_determinism(tmp_path):
    cfg = write(tmp_path, SMALL)
    for d in ("a", "b"):
        assert main(["carleman", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
    for name in ("carleman.csv", "carleman_summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert main(["carleman", "--config", str(cfg), "--out", str(tmp_path / "c"), "--seed", "4"]) == 0
    assert (tmp_path / "a" / "carleman.csv").read_bytes() != (tmp_path / "c" / "carleman.csv").read_bytes()


def test_config_errors_exit_2(tmp_path, capsys):
    cfg = write(tmp_path, "seed: 1\ngrid:\n  T: 2.0\n  Nq: 4\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "line 4" in err and "grid.Nq" in err
    cfg = write(tmp_path, "control:\n  omega: [0.7, 0.3]\n", "d.yaml")
    assert main(["hum", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert main(["hum", "--config", str(tmp_path / "missing.yaml")]) == 2
    cfg = write(tmp_path, "grid: [1, 2\n", "e.yaml")
    assert main(["hum", "--config", str(cfg)]) == 2


def test_config_line_numbers():
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_text("seed: 0\ncontrol:\n  method: newton\n")
    assert exc.value.line == 3
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_text("grid:\n  Na: 2\n")
    assert exc.value.line == 2


def test_strict_failure_exit_3(tmp_path):
    cfg = write(tmp_path, SMALL + "control: {eps: 0.1}\n")
    out = tmp_path / "o"
    assert main(["hum", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["hum", "--config", str(cfg), "--out", str(out), "--strict"]) == 3
    man = json.loads((out / "manifest.json").read_text())
    assert man["checks"]["residual_drop"] is False


def test_sweep(tmp_path):
    cfg = write(tmp_path, SMALL + "sweep: {command: hum, axis: control.eps, values: [1.0e-4, 1.0e-6]}\n")
    out = tmp_path / "o"
    assert main(["sweep", "--config", str(cfg), "--out", str(out), "--threads", "2"]) == 0
    summary = json.loads((out / "sweep_summary.json").read_text())
    drops = [r["residual_drop"] for r in summary["results"]]
    assert len(drops) == 2 and drops[1] >= drops[0]
    assert (out / "run_001" / "manifest.json").exists()
    bad = write(tmp_path, SMALL + "sweep: {command: hum, axis: control.nope, values: [1]}\n", "b.yaml")
    assert main(["sweep", "--config", str(bad), "--out", str(out)]) == 2
    assert main(["sweep", "--config", str(cfg), "--out", str(out), "--threads", "0"]) == 2


def test_full_config_runs(tmp_path):
    cfg = write(tmp_path, SMALL + "coefficients: {k2: {kind: power_at_0, exponent: 0.5}}\n"
                "control: {equal_coefficients: true, full: true}\n")
    out = tmp_path / "o"
    assert main(["hum", "--config", str(cfg), "--out", str(out)]) == 0
    rep = json.loads((out / "hum_report.json").read_text())
    assert rep["gronwall"]["passed_u"] and rep["C_hat"] > 0


def test_shipped_configs_load():
    from pathlib import Path
    root = Path(__file__).resolve().parents[1] / "configs"
    for p in sorted(root.glob("*.yaml")):
        ExperimentConfig.load(p)
