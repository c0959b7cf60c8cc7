import os
from importlib import resources

import pytest

from jumpflow.cli import main

HEAT = """
[grid]
n_interior = 7
[solver]
T = 0.05
dt = 0.01
[experiment]
name = simulate
samples = 1
x = 1:1, 1:2
"""

NOISY = """
[grid]
n_interior = 7
[nonlinearity]
coefficients = 1:1, 3:1
[noise]
kind = multiplicative
marks = 0.3:3
g = tanh
[solver]
T = 0.5
dt = 0.01
[experiment]
name = simulate
samples = 3000
"""


def _write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_validate_ok_and_errors(tmp_path, capsys):
    assert main(["validate", str(_write(tmp_path, HEAT))]) == 0
    assert "ok (experiment = simulate)" in capsys.readouterr().out
    bad = _write(tmp_path, "[solver]\nlambda = -1\ntol = 0\n[experiment]\n", "bad.ini")
    assert main(["validate", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "line 2" in err and "line 3" in err


def test_validate_missing_file(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "nope.ini")]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_run_heat_writes_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(_write(tmp_path, HEAT)), "--out-dir", str(out)]) == 0
    for name in ("report.csv", "report.svg", "manifest.txt", "path.csv", "noise.csv"):
        assert (out / name).exists()
    manifest = (out / "manifest.txt").read_text()
    assert "seed = 0" in manifest and "jumpflow 0.1.0" in manifest and "--- config ---" in manifest
    assert "wall_clock_seconds" in manifest
    assert (out / "path.csv").read_text().startswith("t,is_jump,state_0,")


def test_seed_precedence(tmp_path, monkeypatch):
    cfg = _write(tmp_path, HEAT)
    monkeypatch.setenv("JUMPFLOW_SEED", "17")
    main(["run", str(cfg), "--out-dir", str(tmp_path / "a")])
    assert "seed = 17" in (tmp_path / "a" / "manifest.txt").read_text()
    main(["run", str(cfg), "--out-dir", str(tmp_path / "b"), "--seed", "3"])
    assert "seed = 3" in (tmp_path / "b" / "manifest.txt").read_text()
    monkeypatch.setenv("JUMPFLOW_SEED", "abc")
    with pytest.raises(SystemExit):
        main(["run", str(cfg), "--out-dir", str(tmp_path / "c")])


def test_csv_identical_across_threads(tmp_path):
    cfg = _write(tmp_path, NOISY)
    outs = []
    for threads in ("1", "3"):
        out = tmp_path / f"t{threads}"
        assert main(["run", str(cfg), "--out-dir", str(out), "--threads", threads, "--seed", "9"]) == 0
        outs.append(out)
    for name in ("report.csv", "path.csv", "noise.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_failing_check_gives_nonzero_status(tmp_path, capsys):
    text = "[grid]\nn_interior = 8\n[nonlinearity]\ncoefficients = 1:1\neta = 20\n[experiment]\nname = mixing\nsamples = 2\n"
    assert main(["run", str(_write(tmp_path, text)), "--out-dir", str(tmp_path / "o")]) == 2
    assert "PreconditionError" in capsys.readouterr().err
    assert "status = 2" in (tmp_path / "o" / "manifest.txt").read_text()


def test_bad_threads(tmp_path):
    assert main(["run", str(_write(tmp_path, HEAT)), "--threads", "0", "--out-dir", str(tmp_path)]) == 2


def test_shipped_configs_validate():
    configs = sorted(p for p in resources.files("jumpflow").joinpath("configs").iterdir() if p.name.endswith(".ini"))
    assert len(configs) >= 8
    for p in configs:
        assert main(["validate", str(p)]) == 0


def test_shipped_stability_config_exits_zero(tmp_path):
    path = resources.files("jumpflow").joinpath("configs", "linear_stability.ini")
    assert main(["run", str(path), "--out-dir", str(tmp_path), "--threads", "2"]) == 0
