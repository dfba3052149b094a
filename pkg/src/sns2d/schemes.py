"""One-step time integrators in Leray-projected spectral form.

Variants
--------
``cn_rpde``    linear Crank-Nicolson step for the transformed (random PDE)
               variables y, advected by the BDF2 extrapolation plus the
               micro-mesh noise average, with the matrix quadrature
               correction div I_n^W2 in the momentum balance;
``cn_spde``    the algebraically equivalent step in the original variables
               u = y + Phi W(t), using the correction scalars J_star, J_mid
               and the Brownian increment forcing;
``cn_no_iw2``  ablation: cn_rpde with the matrix correction dropped;
``euler_si``   semi-implicit backward Euler with skew-form convection,
``euler_sis``  advected by y_n + Phi W at t_n / t_{n+1} respectively;
``euler_ie1``  as euler_sis after one fixed-point pass for the advecting field;
``stokes_cn``  Crank-Nicolson for the linear Stokes system (no convection,
               no matrix correction), diagonal in Fourier space.

Every solve projects onto divergence-free fields, so produced velocities are
solenoidal to rounding.  The pressure is recovered a posteriori from the
unprojected momentum residual; for non-solenoidal noise the dynamics use the
projected coefficient and the state carries both the modified pressure (the
one the transformed system sees) and the physical pressure.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .noise import BrownianLattice, NoiseModel, helmholtz_split
from .quadrature import NoiseOnGrid, corrections, iw2_gram, quadrature_IW
from .spectral import (
    Grid2D,
    SpectralField,
    convect,
    convect_skew,
    l2_norm,
    laplacian,
    leray_project,
    scalar_potential,
    zeros_field,
)

__all__ = [
    "VARIANTS",
    "SchemeConfig",
    "SchemeState",
    "SolverError",
    "TimeStepper",
    "solve_linear_step",
    "recover_pressure",
    "step_cn_rpde",
    "step_cn_spde",
    "step_euler",
    "step_stokes_cn",
]

VARIANTS = (
    "cn_rpde",
    "cn_spde",
    "cn_no_iw2",
    "euler_si",
    "euler_sis",
    "euler_ie1",
    "stokes_cn",
)


class SolverError(RuntimeError):
    """Fixed-point iteration failed to converge."""

    def __init__(self, iterations: int, update: float, tol: float):
        super().__init__(
            f"fixed-point solve did not converge in {iterations} iterations "
            f"(last relative update {update:.3e}, tol {tol:.3e}); consider halving tau"
        )
        self.iterations = iterations
        self.update = update


@dataclass
class SchemeConfig:
    variant: str
    nu: float
    tau: float
    fixed_point_tol: float = 1e-10
    fixed_point_max_iters: int = 100
    dealias: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.nu <= 0:
            raise ValueError("viscosity nu must be positive")
        if self.tau <= 0:
            raise ValueError("time step tau must be positive")
        if round(1.0 / self.tau) < 1 or abs(round(1.0 / self.tau) * self.tau - 1.0) > 1e-9:
            raise ValueError(f"1/tau = {1.0 / self.tau:g} must be an integer (micro mesh M = 1/tau)")


@dataclass
class SchemeState:
    """Integrator state: velocity pair (current, previous), pressure, clock."""

    y_curr: SpectralField
    y_prev: SpectralField
    p_curr: SpectralField
    step_index: int
    time: float
    solver_iterations: int = 0
    p_modified: SpectralField | None = None  # only set for non-solenoidal noise


def recover_pressure(residual: SpectralField) -> SpectralField:
    """Mean-zero pressure with grad(p) equal to the gradient part of the residual.

    The residual is the assembled non-pressure side of the momentum balance;
    the normative property is gradient(p) + leray_project(residual) = residual.
    """
    return scalar_potential(residual)


_ANDERSON_DEPTH = 20
_STAGNATION_WINDOW = 10


def _fixed_point(dinv, rhs, conv_op, tol, max_iters, start):
    """Solve y = dinv (rhs - conv_op(y)) by Anderson-accelerated fixed point.

    The map is affine (convection is lagged, diffusion inverted diagonally),
    so a least-squares history over previous sweeps restores convergence even
    when the plain Picard iteration is not a contraction (small nu, large
    advecting field).  When the residual stops improving, the history is
    dropped and the acceleration restarts from the current iterate; stale
    large-residual columns otherwise put a noise floor under the update.
    Terminates when the relative update drops below tol.
    """
    grid = rhs.grid
    if conv_op is None:
        return SpectralField(grid, dinv * rhs.coeffs), 1

    def apply_g(x):
        return dinv * (rhs.coeffs - conv_op(SpectralField(grid, x)).coeffs)

    x = start.coeffs
    g = apply_g(x)
    f = g - x
    d_f, d_g = [], []
    f_prev = g_prev = None
    update = np.inf
    best_resid = np.inf
    since_best = 0
    for k in range(1, max_iters + 1):
        resid = np.sqrt(np.sum(np.abs(f) ** 2))
        if resid < 0.5 * best_resid:
            best_resid = resid
            since_best = 0
        else:
            since_best += 1
        if since_best >= _STAGNATION_WINDOW:
            d_f.clear()
            d_g.clear()
            f_prev = g_prev = None
            best_resid = resid
            since_best = 0
        if f_prev is not None:
            d_f.append((f - f_prev).ravel())
            d_g.append((g - g_prev).ravel())
            if len(d_f) > _ANDERSON_DEPTH:
                d_f.pop(0)
                d_g.pop(0)
        if d_f:
            F = np.stack(d_f, axis=1)
            gamma, *_ = np.linalg.lstsq(F, f.ravel(), rcond=None)
            x_next = g - (np.stack(d_g, axis=1) @ gamma).reshape(g.shape)
        else:
            x_next = g
        update = np.sqrt(np.sum(np.abs(x_next - x) ** 2))
        scale = max(np.sqrt(np.sum(np.abs(x_next) ** 2)), 1e-300)
        x = x_next
        if update <= tol * scale:
            return SpectralField(grid, x), k
        f_prev, g_prev = f, g
        g = apply_g(x)
        f = g - x
    raise SolverError(max_iters, update / scale, tol)


def solve_linear_step(
    a: SpectralField,
    rhs: SpectralField,
    config: SchemeConfig,
    start: SpectralField | None = None,
):
    """Solve (1/tau - nu/2 Lap) y + (1/2) P[(a.grad) y] = rhs by fixed point.

    Diffusion is inverted diagonally in Fourier space each sweep; convection
    is lagged.  Returns (y, iterations).
    """
    grid = rhs.grid
    dinv = 1.0 / (1.0 / config.tau + 0.5 * config.nu * grid.k2_full)
    conv = None
    if l2_norm(a) > 0.0:

        def conv(y):
            return 0.5 * leray_project(convect(a, y, config.dealias))

    if start is None:
        start = SpectralField(grid, dinv * rhs.coeffs)
    return _fixed_point(dinv, rhs, conv, config.fixed_point_tol, config.fixed_point_max_iters, start)


class TimeStepper:
    """Drives one scheme variant along a fixed Brownian lattice.

    A stepper owns its per-study caches (noise fields on the grid, pairwise
    outer products, diagonal solve factors); steppers for different paths are
    fully independent.
    """

    def __init__(
        self,
        config: SchemeConfig,
        grid: Grid2D,
        noise: NoiseModel | None,
        lattice: BrownianLattice | None,
        forcing=None,
    ):
        self.config = config
        self.grid = grid
        self.lattice = lattice
        self.forcing = forcing
        self.noise = noise

        self.general_noise = noise is not None and not noise.all_solenoidal
        if self.general_noise:
            self.split = helmholtz_split(noise)
            dyn = self.split.solenoidal_model(noise)
        else:
            self.split = None
            dyn = noise
        self.dyn_noise = dyn
        self.quad = NoiseOnGrid(dyn, grid, config.dealias) if dyn is not None else None
        if noise is not None and lattice is None:
            raise ValueError("a Brownian lattice is required when noise is present")
        if lattice is not None and noise is not None:
            lattice.micro_indices(0, config.tau)  # validate tau/lattice compatibility early

        self.dinv_cn = 1.0 / (1.0 / config.tau + 0.5 * config.nu * grid.k2_full)
        self.dinv_euler = 1.0 / (1.0 / config.tau + config.nu * grid.k2_full)

    def initial_state(self, y0: SpectralField, t0: float = 0.0) -> SchemeState:
        y = leray_project(y0)
        return SchemeState(
            y_curr=y, y_prev=y.copy(), p_curr=zeros_field(self.grid), step_index=0, time=t0
        )

    # -- noise helpers -----------------------------------------------------

    def _zero(self, rank=1):
        return zeros_field(self.grid, rank)

    def _noise_avg_field(self, n):
        if self.dyn_noise is None:
            return self._zero(), None
        iw = quadrature_IW(self.lattice, n, self.config.tau)
        return self.quad.assemble(iw), iw

    def _iw2_divergence(self, n):
        if self.dyn_noise is None:
            return self._zero()
        gram = iw2_gram(self.lattice, n, self.config.tau)
        return self.quad.assemble_iw2_divergence(gram)

    def _increment(self, n):
        if self.dyn_noise is None:
            return None
        tau = self.config.tau
        i0 = self.lattice.index_at(n * tau)
        i1 = self.lattice.index_at((n + 1) * tau)
        return self.lattice.cumulative[:, i1] - self.lattice.cumulative[:, i0]

    def _forcing_average(self, n):
        if self.forcing is None:
            return None
        return self.forcing.average(self.lattice, n, self.config.tau)

    def _split_pressure(self, q: SpectralField, n: int):
        """Physical pressure from the modified one (general noise only)."""
        if not self.general_noise:
            return q, None
        d_w = self._increment(n)
        shift = self.split.theta_field(self.noise, d_w)
        p = q - (1.0 / self.config.tau) * shift
        return p, q

    # -- steps ---------------------------------------------------------------

    def step(self, state: SchemeState) -> SchemeState:
        v = self.config.variant
        if v in ("cn_rpde", "cn_no_iw2"):
            return self._step_cn(state, with_iw2=(v == "cn_rpde"), spde_form=False)
        if v == "cn_spde":
            return self._step_cn(state, with_iw2=True, spde_form=True)
        if v == "stokes_cn":
            return self._step_stokes(state)
        return self._step_euler(state, v)

    def _step_cn(self, state: SchemeState, with_iw2: bool, spde_form: bool) -> SchemeState:
        cfg = self.config
        tau, nu = cfg.tau, cfg.nu
        n = state.step_index
        y_n, y_prev = state.y_curr, state.y_prev

        if spde_form and self.dyn_noise is not None:
            corr = corrections(self.lattice, n, tau)
            z_star = self.quad.assemble(corr.j_star)
            z_mid = self.quad.assemble(corr.j_mid)
            z_dw = self.quad.assemble(corr.d_w)
        else:
            z_loop, _ = self._noise_avg_field(n)
            z_star = z_mid = z_loop
            z_dw = None

        adv = SpectralField(self.grid, 1.5 * y_n.coeffs - 0.5 * y_prev.coeffs + z_star.coeffs)
        known = SpectralField(self.grid, 0.5 * y_n.coeffs + z_mid.coeffs)
        conv_known = convect(adv, known, cfg.dealias)

        div_iw2 = self._iw2_divergence(n) if with_iw2 else self._zero()
        fbar = self._forcing_average(n)

        rhs_coeffs = (
            (1.0 / tau) * y_n.coeffs
            + 0.5 * nu * laplacian(y_n).coeffs
            + nu * laplacian(z_mid).coeffs
            - conv_known.coeffs
            - div_iw2.coeffs
        )
        if fbar is not None:
            rhs_coeffs = rhs_coeffs + fbar.coeffs
        if z_dw is not None:
            rhs_coeffs = rhs_coeffs + (1.0 / tau) * z_dw.coeffs
        rhs = leray_project(SpectralField(self.grid, rhs_coeffs))

        conv = None
        if l2_norm(adv) > 0.0:

            def conv(y):
                return 0.5 * leray_project(convect(adv, y, cfg.dealias))

        predictor = SpectralField(self.grid, 2.0 * y_n.coeffs - y_prev.coeffs)
        y_new, iters = _fixed_point(
            self.dinv_cn, rhs, conv, cfg.fixed_point_tol, cfg.fixed_point_max_iters, predictor
        )

        midpoint = SpectralField(self.grid, 0.5 * (y_new.coeffs + y_n.coeffs) + z_mid.coeffs)
        resid_coeffs = nu * laplacian(midpoint).coeffs - convect(adv, midpoint, cfg.dealias).coeffs
        if with_iw2:
            resid_coeffs = resid_coeffs - div_iw2.coeffs
        if fbar is not None:
            resid_coeffs = resid_coeffs + fbar.coeffs
        if z_dw is not None:
            resid_coeffs = resid_coeffs + (1.0 / tau) * z_dw.coeffs
        q = recover_pressure(SpectralField(self.grid, resid_coeffs))
        p, q_mod = self._split_pressure(q, n)

        return SchemeState(
            y_curr=y_new,
            y_prev=y_n,
            p_curr=p,
            step_index=n + 1,
            time=state.time + tau,
            solver_iterations=iters,
            p_modified=q_mod,
        )

    def _step_stokes(self, state: SchemeState) -> SchemeState:
        cfg = self.config
        tau, nu = cfg.tau, cfg.nu
        n = state.step_index
        y_n = state.y_curr
        z_loop, _ = self._noise_avg_field(n)
        fbar = self._forcing_average(n)

        rhs_coeffs = (
            (1.0 / tau) * y_n.coeffs + 0.5 * nu * laplacian(y_n).coeffs + nu * laplacian(z_loop).coeffs
        )
        if fbar is not None:
            rhs_coeffs = rhs_coeffs + fbar.coeffs
        rhs = leray_project(SpectralField(self.grid, rhs_coeffs))
        y_new = SpectralField(self.grid, self.dinv_cn * rhs.coeffs)

        midpoint = SpectralField(self.grid, 0.5 * (y_new.coeffs + y_n.coeffs) + z_loop.coeffs)
        resid_coeffs = nu * laplacian(midpoint).coeffs
        if fbar is not None:
            resid_coeffs = resid_coeffs + fbar.coeffs
        q = recover_pressure(SpectralField(self.grid, resid_coeffs))
        p, q_mod = self._split_pressure(q, n)

        return SchemeState(
            y_curr=y_new,
            y_prev=y_n,
            p_curr=p,
            step_index=n + 1,
            time=state.time + tau,
            solver_iterations=1,
            p_modified=q_mod,
        )

    def _step_euler(self, state: SchemeState, variant: str) -> SchemeState:
        cfg = self.config
        tau, nu = cfg.tau, cfg.nu
        n = state.step_index
        y_n = state.y_curr

        if self.dyn_noise is not None:
            w_n = self.lattice.cumulative[:, self.lattice.index_at(n * tau)]
            w_np1 = self.lattice.cumulative[:, self.lattice.index_at((n + 1) * tau)]
            z_n = self.quad.assemble(w_n)
            z_np1 = self.quad.assemble(w_np1)
        else:
            z_n = z_np1 = self._zero()

        f_end = None
        if self.forcing is not None:
            f_end = self.forcing.at_time(self.lattice, (n + 1) * tau)

        def solve_with(advect_field):
            rhs_coeffs = (1.0 / tau) * y_n.coeffs + nu * laplacian(z_np1).coeffs
            rhs_coeffs = rhs_coeffs - convect_skew(advect_field, z_np1, cfg.dealias).coeffs
            if f_end is not None:
                rhs_coeffs = rhs_coeffs + f_end.coeffs
            rhs = leray_project(SpectralField(self.grid, rhs_coeffs))
            conv = None
            if l2_norm(advect_field) > 0.0:

                def conv(y):
                    return leray_project(convect_skew(advect_field, y, cfg.dealias))

            return _fixed_point(
                self.dinv_euler, rhs, conv, cfg.fixed_point_tol, cfg.fixed_point_max_iters, y_n
            )

        if variant == "euler_si":
            adv = y_n + z_n
        elif variant == "euler_sis":
            adv = y_n + z_np1
        elif variant == "euler_ie1":
            y_star, _ = solve_with(y_n + z_np1)
            adv = y_star + z_np1
        else:
            raise ValueError(f"unknown Euler variant {variant!r}")

        y_new, iters = solve_with(adv)

        total = y_new + z_np1
        resid_coeffs = nu * laplacian(total).coeffs - convect_skew(adv, total, cfg.dealias).coeffs
        if f_end is not None:
            resid_coeffs = resid_coeffs + f_end.coeffs
        q = recover_pressure(SpectralField(self.grid, resid_coeffs))
        p, q_mod = self._split_pressure(q, n)

        return SchemeState(
            y_curr=y_new,
            y_prev=y_n,
            p_curr=p,
            step_index=n + 1,
            time=state.time + tau,
            solver_iterations=iters,
            p_modified=q_mod,
        )


def _single_step(state, config, lattice, noise, variant, forcing=None):
    cfg = config if config.variant == variant else replace(config, variant=variant)
    stepper = TimeStepper(cfg, state.y_curr.grid, noise, lattice, forcing)
    return stepper.step(state)


def step_cn_rpde(state, config, lattice, noise, forcing=None) -> SchemeState:
    """One Crank-Nicolson step of the transformed (y) variables."""
    return _single_step(state, config, lattice, noise, "cn_rpde", forcing)


def step_cn_spde(state, config, lattice, noise, forcing=None) -> SchemeState:
    """One modified Crank-Nicolson step of the original (u) variables."""
    return _single_step(state, config, lattice, noise, "cn_spde", forcing)


def step_euler(state, config, lattice, noise, variant="euler_si", forcing=None) -> SchemeState:
    """One semi-implicit backward Euler step (variants si, sis, ie1)."""
    return _single_step(state, config, lattice, noise, variant, forcing)


def step_stokes_cn(state, config, lattice, noise, forcing=None) -> SchemeState:
    """One Crank-Nicolson step for the linear stochastic Stokes system."""
    return _single_step(state, config, lattice, noise, "stokes_cn", forcing)
