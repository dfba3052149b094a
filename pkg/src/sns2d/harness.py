"""Monte Carlo strong-convergence studies and quadrature-lemma checks.

A study fixes a manufactured case, a dyadic step-size ladder and a sample
count.  Each sample path draws one Brownian lattice at the finest needed
resolution; every (variant, tau) cell integrates against that same lattice,
so errors at different tau are strong errors along a common realization.
Recorded functionals (all mean-square):

* velocity:  E max_n || y(t_n) - y_n ||^2,
* midpoint gradient:  tau sum_n E || grad(mid_exact - mid_num) ||^2,
* pressure:  tau sum_n E || pbar_{n+1} - p_{n+1} ||^2, where pbar is the
  lattice-trapezoid time average of the exact pressure over the step.

Sample paths are independent (seed = base_seed + sample index) and can be
farmed out to worker processes; aggregation is ordered by sample index, so
results do not depend on worker scheduling.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .manufactured import CaseOnGrid, get_case
from .noise import sample_lattice
from .quadrature import NoiseOnGrid, oracle_QW, quadrature_IW
from .schemes import VARIANTS, SchemeConfig, SolverError, TimeStepper
from .spectral import Grid2D, h1_seminorm, l2_norm

__all__ = [
    "StudyConfig",
    "ErrorRow",
    "RateFit",
    "ErrorTable",
    "run_study",
    "estimate_rate",
    "check_quadrature_IW",
    "check_triple_integral",
    "check_peano",
    "QuadratureIWReport",
    "TripleIntegralReport",
    "PeanoReport",
]

FUNCTIONALS = ("vel_l2", "h1_mid", "press")


@dataclass
class StudyConfig:
    case: str
    variants: list
    taus: list
    grid_n: int = 32
    samples: int = 16
    base_seed: int = 0
    horizon: float = 1.0
    nu: float | None = None
    amplitude: float | None = None
    lattice_refinement: int = 1
    tol: float = 1e-10
    max_iters: int = 400
    dealias: bool = True
    threads: int = 1

    def __post_init__(self):
        if not self.taus:
            raise ValueError("tau ladder must not be empty")
        taus = [float(t) for t in self.taus]
        if any(t <= 0 for t in taus):
            raise ValueError("tau values must be positive")
        ordered = sorted(taus, reverse=True)
        if taus != ordered or len(set(taus)) != len(taus):
            raise ValueError("tau ladder must be strictly decreasing")
        for t in taus:
            j = math.log2(1.0 / t)
            if abs(j - round(j)) > 1e-9:
                raise ValueError(f"tau={t} is not dyadic (2^-j)")
        self.taus = taus
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        unknown = [v for v in self.variants if v not in VARIANTS and v != "exact"]
        if unknown:
            raise ValueError(f"unknown variants {unknown}; choose from {VARIANTS}")
        if self.lattice_refinement < 1:
            raise ValueError("lattice_refinement must be >= 1")

    @property
    def lattice_delta(self) -> float:
        return min(self.taus) ** 2 / self.lattice_refinement


@dataclass
class ErrorRow:
    variant: str
    tau: float
    err_vel_l2: float
    stderr_vel: float
    err_h1_mid: float
    stderr_h1: float
    err_press: float
    stderr_press: float
    samples: int


@dataclass
class RateFit:
    slope: float
    intercept: float
    slope_stderr: float


@dataclass
class CellFailure:
    variant: str
    tau: float
    sample: int
    message: str


@dataclass
class ErrorTable:
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def row(self, variant, tau) -> ErrorRow:
        for r in self.rows:
            if r.variant == variant and abs(r.tau - tau) < 1e-12:
                return r
        raise KeyError((variant, tau))

    def errors(self, variant, functional) -> list:
        key = {"vel_l2": "err_vel_l2", "h1_mid": "err_h1_mid", "press": "err_press"}[functional]
        rows = [r for r in self.rows if r.variant == variant]
        rows.sort(key=lambda r: -r.tau)
        return [(r.tau, getattr(r, key)) for r in rows]

    def rate(self, variant, functional) -> RateFit:
        return estimate_rate(self.errors(variant, functional))

    def rates(self) -> dict:
        out = {}
        for v in sorted({r.variant for r in self.rows}):
            for f in FUNCTIONALS:
                pairs = self.errors(v, f)
                # a slope needs >= 3 ladder points with positive errors
                if len(pairs) >= 3 and all(e > 0 for _, e in pairs):
                    out[(v, f)] = estimate_rate(pairs)
        return out

    def write_errors_csv(self, path, header_lines=()):
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(
                [
                    "variant",
                    "tau",
                    "err_vel_l2",
                    "stderr_vel",
                    "err_h1_mid",
                    "stderr_h1",
                    "err_press",
                    "stderr_press",
                ]
            )
            for r in self.rows:
                w.writerow(
                    [
                        r.variant,
                        repr(r.tau),
                        repr(r.err_vel_l2),
                        repr(r.stderr_vel),
                        repr(r.err_h1_mid),
                        repr(r.stderr_h1),
                        repr(r.err_press),
                        repr(r.stderr_press),
                    ]
                )

    def write_rates_csv(self, path, header_lines=()):
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["variant", "functional", "slope", "slope_stderr"])
            for (v, f), fit in sorted(self.rates().items()):
                w.writerow([v, f, repr(fit.slope), repr(fit.slope_stderr)])

    def write_plot_data(self, path, header_lines=()):
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["variant", "functional", "log10_tau", "log10_error"])
            for r in self.rows:
                for f, val in (
                    ("vel_l2", r.err_vel_l2),
                    ("h1_mid", r.err_h1_mid),
                    ("press", r.err_press),
                ):
                    if val > 0:
                        w.writerow([r.variant, f, repr(math.log10(r.tau)), repr(math.log10(val))])


def estimate_rate(pairs) -> RateFit:
    """Least-squares slope of log(error) vs log(tau).

    The table stores mean-square errors, so the theoretical strong order 3/2
    corresponds to a slope of 3 here.
    """
    if len(pairs) < 3:
        raise ValueError("rate estimation needs at least 3 ladder points")
    taus = np.array([p[0] for p in pairs], dtype=float)
    errs = np.array([p[1] for p in pairs], dtype=float)
    if np.any(taus <= 0) or np.any(errs <= 0):
        raise ValueError("rate estimation needs positive (tau, error) pairs")
    x = np.log(taus)
    y = np.log(errs)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = len(pairs) - 2
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    denom = float(np.sum((x - x.mean()) ** 2))
    return RateFit(slope=float(slope), intercept=float(intercept), slope_stderr=math.sqrt(s2 / denom))


# ---------------------------------------------------------------------------
# study driver


def _integrate_path(case: CaseOnGrid, lattice, variant, tau, cfg: StudyConfig):
    """One path, one variant, one tau -> (max_vel_err2, h1_sum, press_sum)."""
    n_steps = round(cfg.horizon / tau)
    if variant == "exact":
        return 0.0, 0.0, 0.0
    scheme_cfg = SchemeConfig(
        variant,
        nu=case.nu,
        tau=tau,
        fixed_point_tol=cfg.tol,
        fixed_point_max_iters=cfg.max_iters,
        dealias=cfg.dealias,
    )
    stepper = TimeStepper(scheme_cfg, case.grid, case.noise, lattice, case.forcing)
    if variant == "cn_spde":
        state = stepper.initial_state(case.velocity_with_noise(0.0, np.zeros(case.noise.n_modes)))
    else:
        state = stepper.initial_state(case.velocity(0.0))
    max_e2 = 0.0
    h1_sum = 0.0
    press_sum = 0.0
    for n in range(n_steps):
        y_prev = state.y_curr
        state = stepper.step(state)
        t_new = state.time
        if variant == "cn_spde":
            w = lattice.cumulative[:, lattice.index_at(t_new)]
            exact_new = case.velocity_with_noise(t_new, w)
            w_old = lattice.cumulative[:, lattice.index_at(t_new - tau)]
            exact_old = case.velocity_with_noise(t_new - tau, w_old)
        else:
            exact_new = case.velocity(t_new)
            exact_old = case.velocity(t_new - tau)
        e = l2_norm(state.y_curr - exact_new)
        max_e2 = max(max_e2, e * e)
        mid_diff = 0.5 * (exact_old + exact_new) - 0.5 * (y_prev + state.y_curr)
        h1_sum += tau * h1_seminorm(mid_diff) ** 2
        pbar = case.pressure_average(lattice, n, tau)
        press_sum += tau * l2_norm(pbar - state.p_curr) ** 2
    return max_e2, h1_sum, press_sum


def _sample_cells(case: CaseOnGrid, cfg: StudyConfig, sample: int):
    """All (variant, tau) results for one sample path."""
    lattice = sample_lattice(cfg.base_seed + sample, cfg.lattice_delta, cfg.horizon, case.noise.n_modes)
    out = []
    for variant in cfg.variants:
        for tau in cfg.taus:
            try:
                res = _integrate_path(case, lattice, variant, tau, cfg)
                out.append((variant, tau, res, None))
            except SolverError as exc:
                out.append((variant, tau, None, str(exc)))
    return out


_WORKER_CTX = {}


def _worker_init(cfg: StudyConfig):
    _WORKER_CTX["cfg"] = cfg
    _WORKER_CTX["case"] = _materialize(cfg)


def _worker_run(sample: int):
    return sample, _sample_cells(_WORKER_CTX["case"], _WORKER_CTX["cfg"], sample)


def _materialize(cfg: StudyConfig) -> CaseOnGrid:
    case = get_case(cfg.case, nu=cfg.nu, amplitude=cfg.amplitude)
    return case.on_grid(Grid2D(cfg.grid_n))


def run_study(cfg: StudyConfig) -> ErrorTable:
    """Monte Carlo study over the tau ladder with a shared lattice per path."""
    case = _materialize(cfg)
    per_sample = [None] * cfg.samples
    threads = max(1, min(cfg.threads, cfg.samples))
    if threads == 1:
        for s in range(cfg.samples):
            per_sample[s] = _sample_cells(case, cfg, s)
    else:
        with ProcessPoolExecutor(max_workers=threads, initializer=_worker_init, initargs=(cfg,)) as ex:
            for s, cells in ex.map(_worker_run, range(cfg.samples)):
                per_sample[s] = cells

    table = ErrorTable()
    acc = {}
    for s, cells in enumerate(per_sample):
        for variant, tau, res, err in cells:
            if err is not None:
                table.failures.append(CellFailure(variant, tau, s, err))
            else:
                acc.setdefault((variant, tau), []).append(res)
    for variant in cfg.variants:
        for tau in cfg.taus:
            vals = acc.get((variant, tau), [])
            if not vals:
                continue
            arr = np.asarray(vals)
            n = arr.shape[0]
            mean = arr.mean(axis=0)
            se = arr.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(3)
            table.rows.append(
                ErrorRow(
                    variant=variant,
                    tau=tau,
                    err_vel_l2=float(mean[0]),
                    stderr_vel=float(se[0]),
                    err_h1_mid=float(mean[1]),
                    stderr_h1=float(se[1]),
                    err_press=float(mean[2]),
                    stderr_press=float(se[2]),
                    samples=n,
                )
            )
    return table


# ---------------------------------------------------------------------------
# quadrature / appendix checks


@dataclass
class QuadratureIWRow:
    tau: float
    mc_mean: float
    stderr: float
    expected: float
    z_score: float


@dataclass
class QuadratureIWReport:
    rows: list
    samples: int

    @property
    def passed(self) -> bool:
        return all(r.z_score <= 5.0 for r in self.rows)


def check_quadrature_IW(taus=(1 / 8, 1 / 16, 1 / 32), samples=10_000, seed=0, refinement=16):
    """Monte Carlo check of E|Q_n^W - I_n^W|^2 against the closed form tau^3/3.

    One lattice per tau carries `samples` independent Wiener coordinates over
    a single macro interval; the oracle is trapezoidal on a lattice
    `refinement` times finer than the micro mesh.
    """
    rows = []
    for j, tau in enumerate(taus):
        lat = sample_lattice(seed + j, tau * tau / refinement, tau, samples)
        d = oracle_QW(lat, 0, tau) - quadrature_IW(lat, 0, tau)
        d2 = d * d
        mean = float(np.mean(d2))
        se = float(np.std(d2, ddof=1) / math.sqrt(samples))
        expected = tau**3 / 3.0
        rows.append(QuadratureIWRow(tau, mean, se, expected, abs(mean - expected) / se))
    return QuadratureIWReport(rows=rows, samples=samples)


@dataclass
class TripleIntegralRow:
    tau: float
    mc_mean: float
    stderr: float


@dataclass
class TripleIntegralReport:
    rows: list
    fit: RateFit
    samples: int

    def slope_in(self, lo, hi) -> bool:
        return lo <= self.fit.slope <= hi


def check_triple_integral(
    taus=(1 / 8, 1 / 16, 1 / 32, 1 / 64), samples=10_000, seed=0, grid_n=32, refinement=16
):
    """Mean-square rate of || Q_n^W2 - I_n^W2 ||_{L2} over the tau ladder.

    For a single noise mode the difference factorizes through the fixed
    matrix field phi (x) phi, so the Monte Carlo runs on the scalar Gram
    factor and is rescaled by that field's norm (the factorization itself is
    unit-tested against the assembled fields).
    """
    case = get_case("taylor-green").on_grid(Grid2D(grid_n))
    quad_cache = NoiseOnGrid(case.noise, case.grid)
    unit = quad_cache.assemble_iw2(np.array([[1.0]]))
    field_norm2 = l2_norm(unit) ** 2

    rows = []
    for j, tau in enumerate(taus):
        lat = sample_lattice(seed + 101 * j, tau * tau / refinement, tau, samples)
        # K = samples independent scalar coordinates; per-coordinate Gram factors
        idx = lat.micro_indices(0, tau)
        iw = tau * lat.cumulative[:, idx].sum(axis=1)
        i2 = tau * ((lat.cumulative[:, idx] - iw[:, None]) ** 2).sum(axis=1)
        ts, vals = lat.segment(0, tau)
        q = np.trapezoid(vals, ts, axis=1) / tau
        b = vals - q[:, None]
        w = np.full(ts.size, lat.delta)
        w[0] = w[-1] = 0.5 * lat.delta
        q2 = (b * b * w).sum(axis=1) / tau
        d2 = (q2 - i2) ** 2 * field_norm2
        rows.append(
            TripleIntegralRow(tau, float(np.mean(d2)), float(np.std(d2, ddof=1) / math.sqrt(samples)))
        )
    fit = estimate_rate([(r.tau, r.mc_mean) for r in rows])
    return TripleIntegralReport(rows=rows, fit=fit, samples=samples)


@dataclass
class PeanoReport:
    smooth_defects: list  # (tau, measured, expected) for y(t) = t^2
    smooth_max_abs_error: float
    rough_rms: list  # (tau, rms defect) for the Brownian antiderivative
    rough_fit: RateFit
    samples: int


def check_peano(taus=(1 / 8, 1 / 16, 1 / 32, 1 / 64), samples=1_000, seed=0):
    """Midpoint-average vs BDF2-extrapolation defect on two function families.

    Smooth family y(t) = t^2: the defect is exactly (5/6) tau^2 for every
    interior interval (Simpson quadrature is exact for quadratics).  Rough
    family y' = W (Brownian antiderivative): the rms defect scales like
    tau^{3/2}.
    """
    smooth = []
    worst = 0.0
    for tau in taus:
        for n in (1, 2, 3):
            fine = np.linspace(n * tau, (n + 1) * tau, 257)
            y = fine**2
            h = fine[1] - fine[0]
            simpson = (h / 3) * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-2:2].sum())
            avg = simpson / tau
            extrap = 1.5 * (n * tau) ** 2 - 0.5 * ((n - 1) * tau) ** 2
            defect = avg - extrap
            expected = 5.0 / 6.0 * tau**2
            worst = max(worst, abs(defect - expected))
            smooth.append((tau, defect, expected))

    rough = []
    for j, tau in enumerate(taus):
        delta = tau * tau / 4
        lat = sample_lattice(seed + 7 * j + 1, delta, 1.0, samples)
        ts = lat.times()
        w = lat.cumulative
        y = np.zeros_like(w)
        np.cumsum(0.5 * (w[:, 1:] + w[:, :-1]) * delta, axis=1, out=y[:, 1:])
        stride = round(tau / delta)
        n_cells = round(1.0 / tau)
        # cell averages by trapezoid over each macro cell
        cell_avgs = np.empty((samples, n_cells))
        for n in range(n_cells):
            sl = slice(n * stride, (n + 1) * stride + 1)
            seg = y[:, sl]
            cell_avgs[:, n] = (seg[:, 0] * 0.5 + seg[:, 1:-1].sum(axis=1) + seg[:, -1] * 0.5) * delta / tau
        nodes = y[:, ::stride]
        defects = []
        for n in range(1, n_cells):
            extrap = 1.5 * nodes[:, n] - 0.5 * nodes[:, n - 1]
            defects.append(cell_avgs[:, n] - extrap)
        d = np.concatenate(defects)
        rough.append((tau, float(np.sqrt(np.mean(d * d)))))
    fit = estimate_rate(rough)
    return PeanoReport(
        smooth_defects=smooth,
        smooth_max_abs_error=worst,
        rough_rms=rough,
        rough_fit=fit,
        samples=samples,
    )
