from __future__ import annotations

import logging
import subprocess
import sys

import numpy as np
import pytest

from clumplab.cli import (
    UsageError,
    main,
    parse_config,
    read_config_file,
    worker_count,
)
from clumplab.discretization import read_csv


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["steady", "--m", "1.5"],                          # needs nu or L
    ["steady", "--m", "1.5", "--L", "2", "--nu", "0.4"],
    ["steady", "--m", "0.5", "--L", "2"],
    ["steady", "--m", "2", "--L", "-1"],
    ["steady", "--kernel", "cauchy", "--m", "2", "--L", "1"],
    ["limit", "--m", "2.5"],
    ["limit", "--kernel", "hat", "--m", "1.5"],
    ["particles", "--n", "2"],
    ["evolve", "--n-cells", "0"],
    ["evolve", "--t-end", "abc"],
    ["sweep", "--m-list", "1.5,0.9"],
    ["preset", "fig9"],
])
def test_usage_errors_exit_1(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path / "o")] if argv and argv[0] != "frobnicate"
                else argv) == 1
    assert "error" in capsys.readouterr().err


def test_missing_config_file_is_usage_error(tmp_path):
    assert main(["steady", "--config", str(tmp_path / "nope.cfg")]) == 1


def test_config_file_and_flag_precedence(tmp_path, caplog):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nm = 3\nL = 2.0\nn_cells = 50\nkernel = bessel\n")
    caplog.set_level(logging.WARNING)
    rc = parse_config(["steady", "--config", str(cfg), "--n-cells", "80"])
    assert rc.m == 3.0 and rc.L == 2.0 and rc.kernel == "bessel"
    assert rc.get("n_cells") == 80
    assert "n_cells" in caplog.text
    rc = parse_config(["steady", "--config", str(cfg)])
    assert rc.get("n_cells") == 50
    assert rc.get("tol") == 1e-8  # built-in default


def test_config_file_syntax(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("m 3\n")
    with pytest.raises(UsageError):
        read_config_file(bad)
    ok = tmp_path / "ok.cfg"
    ok.write_text("name = fig2\nfigures = off\nquick = \n")
    assert read_config_file(ok)[:2] == ["fig2", "--no-figures"]


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("CLUMP_LAB_THREADS", "1")
    assert worker_count(8) == 1
    monkeypatch.setenv("CLUMP_LAB_THREADS", "x")
    assert worker_count(3) == 3


def test_steady_command_outputs(tmp_path):
    out = tmp_path / "s"
    assert main(["steady", "--kernel", "gaussian", "--m", "2.2", "--L", "2",
                 "--n-cells", "100", "--out", str(out)]) == 0
    cols, header = read_csv(out / "steady.csv")
    assert set(cols) == {"x", "rho", "variation"}
    assert cols["x"][0] == -2.0 and cols["x"][-1] == 2.0
    assert float(header["nu"]) > 0
    assert (out / "steady.png").stat().st_size > 0
    manifest = (out / "manifest.txt").read_text()
    assert "command = steady" in manifest and "m = 2.2" in manifest
    assert "PASS" in (out / "anchors.txt").read_text()


def test_csv_out_path_and_no_figures(tmp_path):
    target = tmp_path / "d" / "bessel.csv"
    assert main(["bessel", "--m", "3", "--nubar", "0.3", "--n-cells", "100",
                 "--n-scan", "20", "--no-figures", "--out", str(target)]) == 0
    assert target.exists()
    assert not list(target.parent.glob("*.png"))


def test_solver_failure_exit_2(tmp_path):
    assert main(["steady", "--m", "3", "--L", "2", "--n-cells", "40", "--max-iter", "1",
                 "--out", str(tmp_path / "f")]) == 2
    assert main(["bessel", "--m", "3", "--nubar", "0.9", "--n-scan", "10",
                 "--out", str(tmp_path / "g")]) == 2


def test_evolve_is_reproducible(tmp_path):
    args = ["evolve", "--kernel", "bessel", "--m", "3", "--nu", "0.4", "--half-width", "10",
            "--n-cells", "100", "--t-end", "2", "--seed", "11", "--coarse-n", "10",
            "--envelope-sigma", "2", "--snapshots", "0,1,2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("snapshots.csv", "energy.csv", "events.csv", "snapshots.png", "energy.png"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    cols, _ = read_csv(tmp_path / "a" / "snapshots.csv")
    assert list(cols) == ["x", "t=0", "t=1", "t=2"]


def test_particles_command(tmp_path):
    out = tmp_path / "p"
    assert main(["particles", "--n", "20", "--m", "3", "--nu", "0.4", "--t-end", "1",
                 "--method", "rk3", "--snapshots", "0,1", "--out", str(out)]) == 0
    cols, header = read_csv(out / "particles.csv")
    assert header["N"] == "20"
    assert list(cols)[:2] == ["t", "X1"] and len(cols) == 21
    assert np.all(np.diff(np.array([cols[f"X{i}"][-1] for i in range(1, 21)])) > 0)


def test_limit_and_sweep_commands(tmp_path):
    assert main(["limit", "--kernel", "bessel", "--m", "1.5", "--out", str(tmp_path / "l")]) == 0
    cols, header = read_csv(tmp_path / "l" / "limit.csv")
    assert float(header["nu_inf"]) == pytest.approx(1 / np.sqrt(6))
    assert main(["sweep", "--m-list", "2.5,3", "--L-list", "1,2", "--cells-per-unit", "20",
                 "--workers", "2", "--out", str(tmp_path / "w")]) == 0
    cols, _ = read_csv(tmp_path / "w" / "sweep.csv")
    assert np.all(cols["nu_m3"] > 0)


@pytest.mark.parametrize("name", ["fig2", "fig4"])
def test_quick_presets(name, tmp_path):
    out = tmp_path / name
    assert main(["preset", name, "--quick", "--out", str(out)]) == 0
    assert list(out.glob("*.csv")) and list(out.glob("*.png"))
    assert (out / "anchors.txt").read_text().strip()


def test_console_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "clumplab.cli", "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "preset" in res.stdout
