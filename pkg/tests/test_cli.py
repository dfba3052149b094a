"""Tests for the configuration format and the command-line front end."""

import csv
import os

import numpy as np
import pytest

from sns2d.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main, read_snapshot, write_snapshot
from sns2d.config import ConfigError, load_config, parse_number


def write_config(path, text):
    path.write_text(text)
    return str(path)


BASE_RUN = """
[problem]
case = quiescent
nu = 0.5
T = 0.5
grid = 16

[time]
tau = 1/8

[scheme]
variant = cn_rpde

[study]
base_seed = 7

[output]
directory = {out}
"""


class TestConfigParsing:
    def test_fraction_numbers(self):
        assert parse_number("1/8") == 0.125
        assert parse_number("0.25") == 0.25
        with pytest.raises(ConfigError):
            parse_number("eight")

    def test_unknown_key_rejected(self, tmp_path):
        cfg = write_config(tmp_path / "c.ini", "[problem]\nmystery = 1\n")
        with pytest.raises(ConfigError):
            load_config(cfg)

    def test_unknown_section_rejected(self, tmp_path):
        cfg = write_config(tmp_path / "c.ini", "[extras]\nx = 1\n")
        with pytest.raises(ConfigError):
            load_config(cfg)

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_config("/nonexistent/path.ini")

    def test_round_trip_values(self, tmp_path):
        cfg = write_config(
            tmp_path / "c.ini",
            "[problem]\ncase = taylor-green\nnu = 0.25\nT = 2.0\ngrid = 64\n"
            "[time]\ntau_ladder = 1/8, 1/16, 1/32\nlattice_refinement = 4\n"
            "[scheme]\nvariants = cn_rpde, euler_si\ntol = 1e-9\nmax_iters = 50\ndealias = false\n"
            "[study]\nsamples = 5\nbase_seed = 99\n"
            "[noise]\namplitude = 2.0\nmodes = taylor-green, gradient-cos\nsolenoidal = true, false\n",
        )
        s = load_config(cfg)
        assert s.case == "taylor-green" and s.nu == 0.25 and s.horizon == 2.0 and s.grid == 64
        assert s.tau_ladder == [1 / 8, 1 / 16, 1 / 32] and s.lattice_refinement == 4
        assert s.variants == ["cn_rpde", "euler_si"] and s.tol == 1e-9 and not s.dealias
        assert s.samples == 5 and s.base_seed == 99
        assert s.mode_names == ["taylor-green", "gradient-cos"]
        assert s.solenoidal == [True, False]


class TestRunCommand:
    def test_zero_noise_zero_initial_gives_zero_trajectory(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path / "run.ini", BASE_RUN.format(out=out))
        assert main(["run", "--config", cfg]) == EXIT_OK
        with open(out / "trajectory.csv") as fh:
            rows = list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))
        assert len(rows) == 5  # initial state + 4 steps
        for row in rows:
            assert float(row["energy"]) == 0.0
            assert float(row["max_divergence"]) == 0.0

    def test_fixed_seed_reruns_identical(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        text = """
[problem]
case = taylor-green
T = 0.5
grid = 16

[time]
tau = 1/8

[scheme]
variant = cn_rpde
max_iters = 400

[study]
base_seed = 3
"""
        cfg = write_config(tmp_path / "run.ini", text)
        assert main(["run", "--config", cfg, "--output", str(out1)]) == EXIT_OK
        assert main(["run", "--config", cfg, "--output", str(out2)]) == EXIT_OK
        body1 = [ln for ln in open(out1 / "trajectory.csv") if not ln.startswith("#")]
        body2 = [ln for ln in open(out2 / "trajectory.csv") if not ln.startswith("#")]
        assert body1 == body2

    def test_seed_override_changes_output(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        text = """
[problem]
case = taylor-green
T = 0.5
grid = 16

[time]
tau = 1/8

[scheme]
variant = cn_rpde
max_iters = 400

[study]
base_seed = 3
"""
        cfg = write_config(tmp_path / "run.ini", text)
        assert main(["run", "--config", cfg, "--output", str(out1)]) == EXIT_OK
        assert main(["run", "--config", cfg, "--output", str(out2), "--seed", "4"]) == EXIT_OK
        body1 = [ln for ln in open(out1 / "trajectory.csv") if not ln.startswith("#")]
        body2 = [ln for ln in open(out2 / "trajectory.csv") if not ln.startswith("#")]
        assert body1 != body2

    def test_taylor_green_decay(self, tmp_path):
        # free decay: energy(t) = energy(0) exp(-16 pi^2 nu t) to CN accuracy
        out = tmp_path / "out"
        text = """
[problem]
case = taylor-green-decay
nu = 0.05
T = 0.5
grid = 32

[time]
tau = 1/64

[scheme]
variant = cn_rpde

[study]
base_seed = 0
"""
        cfg = write_config(tmp_path / "run.ini", text)
        assert main(["run", "--config", cfg, "--output", str(out)]) == EXIT_OK
        with open(out / "trajectory.csv") as fh:
            rows = list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))
        e0 = float(rows[0]["energy"])
        nu = 0.05
        for row in rows:
            t = float(row["t"])
            expected = e0 * np.exp(-16 * np.pi**2 * nu * t)
            assert abs(float(row["energy"]) - expected) <= 5e-3 * e0

    def test_snapshots(self, tmp_path):
        out = tmp_path / "out"
        text = """
[problem]
case = taylor-green-decay
nu = 0.1
T = 0.25
grid = 16

[time]
tau = 1/8

[scheme]
variant = cn_rpde

[output]
formats = csv, binary
snapshot_every = 1
"""
        cfg = write_config(tmp_path / "run.ini", text)
        assert main(["run", "--config", cfg, "--output", str(out)]) == EXIT_OK
        data, t = read_snapshot(out / "field_000001.dat")
        assert data.shape == (2, 16, 16)
        assert abs(t - 0.125) < 1e-12
        assert (out / "field_000001.csv").exists()

    def test_missing_tau_is_config_error(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path / "run.ini",
            f"[problem]\ncase = quiescent\ngrid = 16\n[output]\ndirectory = {out}\n",
        )
        assert main(["run", "--config", cfg]) == EXIT_CONFIG


class TestConvergenceCommand:
    CFG = """
[problem]
case = stokes-taylor-green
T = 1.0
grid = 16

[time]
tau_ladder = 1/4, 1/8, 1/16

[scheme]
variants = stokes_cn

[study]
samples = 2
base_seed = 5
"""

    def test_writes_three_csvs(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path / "conv.ini", self.CFG)
        assert main(["convergence", "--config", cfg, "--output", str(out)]) == EXIT_OK
        for name in ("errors.csv", "rates.csv", "plotdata.csv"):
            assert (out / name).exists()
        with open(out / "errors.csv") as fh:
            rows = list(csv.reader(ln for ln in fh if not ln.startswith("#")))
        assert len(rows) == 1 + 3

    def test_byte_identical_reruns_modulo_timestamp(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        cfg = write_config(tmp_path / "conv.ini", self.CFG)
        assert main(["convergence", "--config", cfg, "--output", str(out1)]) == EXIT_OK
        assert main(["convergence", "--config", cfg, "--output", str(out2)]) == EXIT_OK
        for name in ("errors.csv", "rates.csv", "plotdata.csv"):
            b1 = [ln for ln in open(out1 / name) if not ln.startswith("#")]
            b2 = [ln for ln in open(out2 / name) if not ln.startswith("#")]
            assert b1 == b2

    def test_empty_ladder_exit_code_one(self, tmp_path):
        cfg = write_config(
            tmp_path / "conv.ini",
            "[problem]\ncase = stokes-taylor-green\ngrid = 16\n[scheme]\nvariants = stokes_cn\n",
        )
        assert main(["convergence", "--config", cfg, "--output", str(tmp_path / "o")]) == EXIT_CONFIG

    def test_solver_failure_exit_code_two(self, tmp_path):
        text = """
[problem]
case = taylor-green
T = 1.0
grid = 16

[time]
tau_ladder = 1/4, 1/8, 1/16

[scheme]
variants = cn_rpde
max_iters = 1

[study]
samples = 1
base_seed = 5
"""
        cfg = write_config(tmp_path / "conv.ini", text)
        assert main(["convergence", "--config", cfg, "--output", str(tmp_path / "o")]) == EXIT_SOLVER

    def test_no_partial_files_on_failure(self, tmp_path):
        out = tmp_path / "o"
        text = """
[problem]
case = taylor-green
T = 1.0
grid = 16

[time]
tau_ladder = 1/4, 1/8

[scheme]
variants = cn_rpde
max_iters = 1

[study]
samples = 1
"""
        cfg = write_config(tmp_path / "conv.ini", text)
        assert main(["convergence", "--config", cfg, "--output", str(out)]) == EXIT_SOLVER
        leftovers = [p for p in out.iterdir()] if out.exists() else []
        assert not [p for p in leftovers if p.suffix == ".part"]
        assert not (out / "errors.csv").exists()


class TestCheckCommand:
    def test_check_reports_and_exit_code(self, tmp_path):
        # the triple-integral window [2.7, 3.3] assumes the cubic bound is
        # sharp; the attained decay is quartic, so that check fails (exit 3)
        out = tmp_path / "out"
        text = """
[problem]
case = taylor-green
grid = 16

[check]
samples_iw = 3000
samples_iw2 = 2000
samples_peano = 300
"""
        cfg = write_config(tmp_path / "check.ini", text)
        code = main(["check", "--config", cfg, "--output", str(out)])
        with open(out / "checks.csv") as fh:
            rows = {r["check"]: r for r in csv.DictReader(ln for ln in fh if not ln.startswith("#"))}
        assert rows["quadrature_iw"]["passed"] == "True"
        assert rows["peano_smooth"]["passed"] == "True"
        assert rows["peano_rough"]["passed"] == "True"
        assert rows["triple_integral"]["passed"] == "False"
        assert float(rows["triple_integral"]["value"]) > 3.3
        assert code == EXIT_CHECK


class TestSnapshotFormat:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        values = rng.standard_normal((2, 16, 16))
        path = tmp_path / "snap.dat"
        write_snapshot(path, values, 0.75)
        data, t = read_snapshot(path)
        assert t == 0.75
        assert np.array_equal(data, values)

    def test_rejects_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.dat"
        path.write_bytes(b"XXXX" + b"\x00" * 32)
        with pytest.raises(ValueError):
            read_snapshot(path)
