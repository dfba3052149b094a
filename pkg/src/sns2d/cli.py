"""Command-line front end: single runs, convergence studies, quadrature checks.

    sns2d run         --config exp.ini [--output DIR] [--seed S] [--threads N]
    sns2d convergence --config exp.ini [--output DIR] [--seed S] [--threads N]
    sns2d check       --config exp.ini [--output DIR] [--seed S]

Exit codes: 0 success, 1 configuration error, 2 solver failure, 3 failed
check.  Output files are written to a temporary name and renamed on success,
so a failing command leaves no partial files.  Apart from one timestamped
comment line per file, outputs are a deterministic function of the
configuration file and seed.  The SNS2D_OUTPUT environment variable supplies
the default output directory.
"""

from __future__ import annotations

import argparse
import csv
import os
import struct
import sys
import tempfile
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np

from .config import ConfigError, RunSettings, load_config
from .harness import (
    StudyConfig,
    check_peano,
    check_quadrature_IW,
    check_triple_integral,
    run_study,
)
from .manufactured import NOISE_SHAPES, get_case
from .noise import sample_lattice
from .schemes import SchemeConfig, SolverError, TimeStepper
from .spectral import Grid2D, l2_norm, max_divergence, transform_backward

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_CHECK = 3

_SNAPSHOT_MAGIC = b"SFLD"
_SNAPSHOT_VERSION = 1


def _timestamp_line() -> str:
    return f"generated {datetime.now(timezone.utc).isoformat()}"


def _atomic_write(path: str, writer) -> None:
    """Write via a temp file in the same directory, rename on success."""
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_bytes(path: str, payload: bytes) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_snapshot(path: str, values: np.ndarray, time: float) -> None:
    """Self-describing binary field dump (magic, version, n, ncomp, time, data)."""
    values = np.asarray(values, dtype="<f8")
    if values.ndim == 2:
        values = values[None]
    ncomp, n, n2 = values.shape
    if n != n2:
        raise ValueError("snapshot expects square grids")
    header = struct.pack("<4sBIId", _SNAPSHOT_MAGIC, _SNAPSHOT_VERSION, n, ncomp, time)
    _atomic_write_bytes(path, header + values.tobytes())


def read_snapshot(path: str):
    with open(path, "rb") as fh:
        head = fh.read(struct.calcsize("<4sBIId"))
        magic, version, n, ncomp, time = struct.unpack("<4sBIId", head)
        if magic != _SNAPSHOT_MAGIC:
            raise ValueError("not a field snapshot file")
        if version != _SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(ncomp, n, n)
    return data, time


def _build_case(settings: RunSettings):
    case = get_case(settings.case, nu=settings.nu, amplitude=settings.amplitude)
    if settings.mode_names:
        try:
            shapes = tuple(NOISE_SHAPES[name] for name in settings.mode_names)
        except KeyError as exc:
            raise ConfigError(
                f"unknown noise mode {exc.args[0]!r}; available: {', '.join(sorted(NOISE_SHAPES))}"
            ) from None
        flags = tuple(settings.solenoidal) if settings.solenoidal else ()
        if flags and len(flags) != len(shapes):
            raise ConfigError("solenoidal flags do not match the number of modes")
        case = replace(case, noise_shapes=shapes, noise_solenoidal=flags)
    if settings.n_modes is not None:
        if settings.n_modes > len(case.noise_shapes):
            raise ConfigError(
                f"K={settings.n_modes} exceeds the {len(case.noise_shapes)} available modes"
            )
        case = replace(
            case,
            noise_shapes=case.noise_shapes[: settings.n_modes],
            noise_solenoidal=case.noise_solenoidal[: settings.n_modes],
        )
    return case


def cmd_run(settings: RunSettings, out_dir: str, threads: int) -> int:
    if settings.tau is None:
        raise ConfigError("run requires [time] tau")
    if len(settings.variants) != 1:
        raise ConfigError("run uses exactly one scheme variant")
    variant = settings.variants[0]
    tau = settings.tau

    case = _build_case(settings).on_grid(Grid2D(settings.grid))
    delta = tau * tau / settings.lattice_refinement
    lattice = sample_lattice(settings.base_seed, delta, settings.horizon, case.noise.n_modes)
    cfg = SchemeConfig(
        variant,
        nu=case.nu,
        tau=tau,
        fixed_point_tol=settings.tol,
        fixed_point_max_iters=settings.max_iters,
        dealias=settings.dealias,
    )
    stepper = TimeStepper(cfg, case.grid, case.noise, lattice, case.forcing)
    state = stepper.initial_state(case.velocity(0.0))

    n_steps = round(settings.horizon / tau)
    rows = []
    snapshots = []

    def observe(st):
        w = lattice.cumulative[:, lattice.index_at(st.time)]
        u = st.y_curr + case.noise.assemble(w)
        rows.append(
            (
                st.step_index,
                st.time,
                0.5 * l2_norm(u) ** 2,
                max_divergence(st.y_curr),
                st.solver_iterations,
            )
        )
        if settings.snapshot_every and st.step_index % settings.snapshot_every == 0:
            snapshots.append((st.step_index, st.time, transform_backward(u)))

    observe(state)
    for _ in range(n_steps):
        state = stepper.step(state)
        observe(state)

    def write(fh):
        fh.write(f"# {_timestamp_line()}\n")
        w = csv.writer(fh)
        w.writerow(["step", "t", "energy", "max_divergence", "solver_iterations"])
        for step, t, en, dv, it in rows:
            w.writerow([step, repr(t), repr(en), repr(dv), it])

    _atomic_write(os.path.join(out_dir, "trajectory.csv"), write)

    if "binary" in settings.formats:
        for step, t, u_phys in snapshots:
            write_snapshot(os.path.join(out_dir, f"field_{step:06d}.dat"), u_phys, t)
    if "csv" in settings.formats and settings.snapshot_every and settings.grid <= 64:
        for step, t, u_phys in snapshots:

            def write_snap(fh, u_phys=u_phys, t=t):
                fh.write(f"# {_timestamp_line()}\n")
                w = csv.writer(fh)
                w.writerow(["i", "j", "u0", "u1"])
                n = u_phys.shape[-1]
                for i in range(n):
                    for j in range(n):
                        w.writerow([i, j, repr(u_phys[0, i, j]), repr(u_phys[1, i, j])])

            _atomic_write(os.path.join(out_dir, f"field_{step:06d}.csv"), write_snap)
    print(f"wrote {os.path.join(out_dir, 'trajectory.csv')} ({len(rows)} rows)")
    return EXIT_OK


def cmd_convergence(settings: RunSettings, out_dir: str, threads: int) -> int:
    if not settings.tau_ladder:
        raise ConfigError("convergence requires [time] tau_ladder")
    study = StudyConfig(
        case=settings.case,
        variants=settings.variants,
        taus=settings.tau_ladder,
        grid_n=settings.grid,
        samples=settings.samples,
        base_seed=settings.base_seed,
        horizon=settings.horizon,
        nu=settings.nu,
        amplitude=settings.amplitude,
        lattice_refinement=settings.lattice_refinement,
        tol=settings.tol,
        max_iters=settings.max_iters,
        dealias=settings.dealias,
        threads=threads,
    )
    table = run_study(study)
    if table.failures:
        for f in table.failures:
            print(
                f"solver failure: variant={f.variant} tau={f.tau} sample={f.sample}: {f.message}",
                file=sys.stderr,
            )
        return EXIT_SOLVER

    stamp = [_timestamp_line()]
    for fname, writer in (
        ("errors.csv", table.write_errors_csv),
        ("rates.csv", table.write_rates_csv),
        ("plotdata.csv", table.write_plot_data),
    ):
        final = os.path.join(out_dir, fname)
        tmp = final + ".part"
        writer(tmp, header_lines=stamp)
        os.replace(tmp, final)
    for (v, f), fit in sorted(table.rates().items()):
        print(f"{v:12s} {f:7s} slope {fit.slope:6.3f} +- {fit.slope_stderr:.3f}")
    return EXIT_OK


def cmd_check(settings: RunSettings, out_dir: str) -> int:
    seed = settings.base_seed
    iw = check_quadrature_IW(samples=settings.samples_iw, seed=seed)
    triple = check_triple_integral(samples=settings.samples_iw2, seed=seed, grid_n=settings.grid)
    peano = check_peano(samples=settings.samples_peano, seed=seed)

    triple_ok = 2.7 <= triple.fit.slope <= 3.3
    peano_smooth_ok = peano.smooth_max_abs_error <= 1e-12
    peano_rough_ok = peano.rough_fit.slope >= 1.4

    rows = [
        ("quadrature_iw", "max_z_score", max(r.z_score for r in iw.rows), "<= 5", iw.passed),
        ("triple_integral", "ms_slope", triple.fit.slope, "[2.7, 3.3]", triple_ok),
        ("peano_smooth", "max_defect_error", peano.smooth_max_abs_error, "<= 1e-12", peano_smooth_ok),
        ("peano_rough", "rms_slope", peano.rough_fit.slope, ">= 1.4", peano_rough_ok),
    ]

    def write(fh):
        fh.write(f"# {_timestamp_line()}\n")
        w = csv.writer(fh)
        w.writerow(["check", "quantity", "value", "requirement", "passed"])
        for name, qty, value, req, ok in rows:
            w.writerow([name, qty, repr(float(value)), req, ok])

    _atomic_write(os.path.join(out_dir, "checks.csv"), write)
    for name, qty, value, req, ok in rows:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {qty} = {float(value):.6g} (need {req})")
    return EXIT_OK if all(r[4] for r in rows) else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sns2d",
        description="Pseudo-spectral integrators for 2D stochastic Navier-Stokes/Stokes flow",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("run", "integrate a single path and write a trajectory CSV"),
        ("convergence", "Monte Carlo strong-convergence study over a tau ladder"),
        ("check", "quadrature and extrapolation lemma checks"),
    ):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", required=True, help="experiment configuration file")
        p.add_argument("--output", default=None, help="output directory (default: config/env)")
        p.add_argument("--threads", type=int, default=1, help="worker process cap")
        p.add_argument("--seed", type=int, default=None, help="override the base seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = load_config(args.config)
        if args.seed is not None:
            settings.base_seed = args.seed
        out_dir = args.output or os.environ.get("SNS2D_OUTPUT") or settings.directory
        os.makedirs(out_dir, exist_ok=True)
        if args.command == "run":
            return cmd_run(settings, out_dir, args.threads)
        if args.command == "convergence":
            return cmd_convergence(settings, out_dir, args.threads)
        return cmd_check(settings, out_dir)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
