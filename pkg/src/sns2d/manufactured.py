"""Exact-solution test problems with path-dependent forcing.

Each case prescribes a solenoidal velocity y(t, x) = c(t) g(x), a mean-zero
pressure p(t, x) = d(t) q(x) and a finite-mode noise coefficient, and builds
the forcing that makes (y, p) the exact solution of the transformed momentum
balance

    dy/dt + ((y + Phi W) . grad)(y + Phi W) - nu Lap(y + Phi W) + grad p = f

(without the convection term for Stokes cases).  Because the exact fields are
a handful of fixed spatial shapes with scalar time coefficients, the forcing
is stored as (coefficient function, shape field) pairs: its micro-grid time
average then needs only scalar quadrature per step.

Spatial derivatives of the shapes are taken spectrally; for the low-harmonic
shapes used here the dealiased products are exact, so the PDE residual of the
exact triple vanishes to rounding at every lattice time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .noise import BrownianLattice, NoiseModel
from .spectral import (
    Grid2D,
    SpectralField,
    convect,
    field_from_function,
    gradient,
    l2_norm,
    laplacian,
    max_divergence,
    transform_backward,
)

__all__ = [
    "ManufacturedCase",
    "CaseOnGrid",
    "CASES",
    "NOISE_SHAPES",
    "get_case",
    "case_names",
    "eval_exact",
    "eval_forcing",
]

TWO_PI = 2.0 * np.pi


def _taylor_green(X, Y):
    A, B = TWO_PI * X, TWO_PI * Y
    return np.stack([np.cos(A) * np.sin(B), -np.sin(A) * np.cos(B)])


def _taylor_green_rotated(X, Y):
    A, B = TWO_PI * X, TWO_PI * Y
    return np.stack([-np.sin(A) * np.cos(B), np.cos(A) * np.sin(B)])


def _taylor_green_second(X, Y):
    A, B = 2 * TWO_PI * X, 2 * TWO_PI * Y
    return np.stack([np.cos(A) * np.sin(B), -np.sin(A) * np.cos(B)])


def _mixed_harmonic(X, Y):
    # stream function [cos(2 pi x) cos(2 pi y) + (1/2) cos(2 pi x) cos(4 pi y)] / 2 pi:
    # mixes two Laplacian eigenvalues, so its self-advection is not a pure
    # gradient and the matrix noise correction acts on the velocity.
    A, B, C = TWO_PI * X, TWO_PI * Y, 2 * TWO_PI * Y
    return np.stack(
        [
            np.cos(A) * np.sin(B) + np.cos(A) * np.sin(C),
            -np.sin(A) * np.cos(B) - 0.5 * np.sin(A) * np.cos(C),
        ]
    )


def _taylor_green_two_scale(X, Y):
    # first plus half of the second Taylor-Green harmonic: the two Laplacian
    # eigenvalues are well separated, so the self-advection has a strong
    # non-gradient part at a modest amplitude (what the matrix noise
    # correction acts on), while single-harmonic modes self-advect as pure
    # gradients.
    return _taylor_green(X, Y) + 0.5 * _taylor_green_second(X, Y)


def _anisotropic(X, Y):
    A, C = TWO_PI * X, 2 * TWO_PI * Y
    return np.stack([2 * np.cos(A) * np.sin(C), -np.sin(A) * np.cos(C)])


def _gradient_cos(X, Y):
    # gradient of cos(2 pi x) / (2 pi): a non-solenoidal (curl-free) mode
    return np.stack([-np.sin(TWO_PI * X), np.zeros_like(Y)])


NOISE_SHAPES = {
    "taylor-green": _taylor_green,
    "taylor-green-rotated": _taylor_green_rotated,
    "taylor-green-second": _taylor_green_second,
    "mixed-harmonic": _mixed_harmonic,
    "taylor-green-two-scale": _taylor_green_two_scale,
    "anisotropic": _anisotropic,
    "gradient-cos": _gradient_cos,
}


def _pressure_shape(X, Y):
    return 0.25 * (np.cos(2 * TWO_PI * X) + np.cos(2 * TWO_PI * Y))


@dataclass
class ManufacturedCase:
    """Closed-form case definition; materialize on a grid with :meth:`on_grid`."""

    name: str
    nu: float
    amplitude: float
    stokes: bool
    velocity_shape: callable
    velocity_coef: callable
    velocity_coef_dt: callable
    pressure_shape: callable
    pressure_coef: callable
    noise_shapes: tuple
    noise_solenoidal: tuple = ()  # empty: detect per mode

    def on_grid(self, grid: Grid2D) -> "CaseOnGrid":
        return CaseOnGrid(self, grid)


class _Forcing:
    """Forcing assembled from (time coefficient, spatial shape) terms."""

    def __init__(self, terms, grid):
        self.terms = terms  # list of (coef(t, w) -> array, SpectralField)
        self.grid = grid

    def _weights(self, ts, ws):
        return [np.asarray(coef(ts, ws), dtype=np.float64) for coef, _ in self.terms]

    def average(self, lattice: BrownianLattice, n: int, tau: float) -> SpectralField:
        """Left-point Riemann average of f over [t_n, t_{n+1}) on the lattice."""
        i0 = lattice.index_at(n * tau)
        i1 = lattice.index_at((n + 1) * tau)
        ts = lattice.times()[i0:i1]
        ws = lattice.cumulative[:, i0:i1]
        out = np.zeros_like(self.terms[0][1].coeffs)
        for w_arr, (_, shape) in zip(self._weights(ts, ws), self.terms):
            out += float(np.mean(w_arr)) * shape.coeffs
        return SpectralField(self.grid, out)

    def at_time(self, lattice: BrownianLattice, t: float) -> SpectralField:
        i = lattice.index_at(t)
        ts = lattice.times()[i : i + 1]
        ws = lattice.cumulative[:, i : i + 1]
        out = np.zeros_like(self.terms[0][1].coeffs)
        for w_arr, (_, shape) in zip(self._weights(ts, ws), self.terms):
            out += float(w_arr[0]) * shape.coeffs
        return SpectralField(self.grid, out)


class CaseOnGrid:
    """A manufactured case with all spatial shapes materialized on one grid."""

    def __init__(self, case: ManufacturedCase, grid: Grid2D):
        self.case = case
        self.grid = grid
        self.nu = case.nu
        self.stokes = case.stokes
        self.name = case.name

        self.g = field_from_function(grid, case.velocity_shape)
        if max_divergence(self.g) > 1e-12 * l2_norm(self.g):
            raise ValueError(f"case {case.name}: velocity shape is not solenoidal")
        self.p_shape = field_from_function(grid, case.pressure_shape)
        if abs(self.p_shape.mean_value()) > 1e-13:
            raise ValueError(f"case {case.name}: pressure shape is not mean-zero")

        modes = [field_from_function(grid, fn) for fn in case.noise_shapes]
        flags = list(case.noise_solenoidal) if case.noise_solenoidal else []
        self.noise = NoiseModel(modes=modes, amplitude=case.amplitude, solenoidal=flags)

        self._c = case.velocity_coef
        self._c_dt = case.velocity_coef_dt
        self._d = case.pressure_coef
        self.forcing = _Forcing(self._build_forcing_terms(), grid)

    # -- exact fields --------------------------------------------------------

    def velocity(self, t: float) -> SpectralField:
        return float(self._c(t)) * self.g

    def velocity_coef(self, t):
        return self._c(t)

    def velocity_rate(self, t: float) -> SpectralField:
        """Time derivative of the exact velocity."""
        return float(self._c_dt(t)) * self.g

    def velocity_with_noise(self, t: float, weights) -> SpectralField:
        """u(t) = y(t) + Phi W(t) for given Wiener coordinates."""
        return self.velocity(t) + self.noise.assemble(weights)

    def pressure(self, t: float) -> SpectralField:
        return float(self._d(t)) * self.p_shape

    def pressure_average(self, lattice: BrownianLattice, n: int, tau: float) -> SpectralField:
        """Trapezoidal lattice average of the exact pressure over [t_n, t_{n+1}]."""
        i0 = lattice.index_at(n * tau)
        i1 = lattice.index_at((n + 1) * tau)
        ts = lattice.times()[i0 : i1 + 1]
        mean_coef = np.trapezoid(np.asarray(self._d(ts), dtype=np.float64), ts) / tau
        return float(mean_coef) * self.p_shape

    # -- forcing construction ------------------------------------------------

    def _build_forcing_terms(self):
        case, grid = self.case, self.grid
        nu, mu = case.nu, case.amplitude
        g = self.g
        modes = self.noise.modes
        K = len(modes)
        c, c_dt, d = self._c, self._c_dt, self._d

        terms = [
            (lambda t, w: c_dt(t), g),
            (lambda t, w: -nu * c(t), laplacian(g)),
            (lambda t, w: d(t), gradient(self.p_shape)),
        ]
        for k in range(K):
            terms.append(
                (lambda t, w, k=k: -nu * mu * w[k], laplacian(modes[k]))
            )
        if not case.stokes:
            terms.append((lambda t, w: c(t) ** 2, convect(g, g)))
            for k in range(K):
                cross = convect(g, modes[k]) + convect(modes[k], g)
                terms.append((lambda t, w, k=k: mu * c(t) * w[k], cross))
            for k in range(K):
                for m in range(K):
                    terms.append(
                        (lambda t, w, k=k, m=m: mu * mu * w[k] * w[m], convect(modes[k], modes[m]))
                    )
        return terms

    def pde_residual(self, lattice: BrownianLattice, t: float) -> SpectralField:
        """Momentum-balance residual of the exact triple at a lattice time."""
        i = lattice.index_at(t)
        w = lattice.cumulative[:, i]
        total = self.velocity_with_noise(t, w)
        out = float(self._c_dt(t)) * self.g.coeffs
        out = out - self.nu * laplacian(total).coeffs
        out = out + float(self._d(t)) * gradient(self.p_shape).coeffs
        if not self.stokes:
            out = out + convect(total, total).coeffs
        f = self.forcing.at_time(lattice, t)
        return SpectralField(self.grid, out - f.coeffs)


def eval_exact(case_on_grid: CaseOnGrid, t: float):
    """Exact (velocity, pressure) fields of a materialized case at time t."""
    return case_on_grid.velocity(t), case_on_grid.pressure(t)


def eval_forcing(case_on_grid: CaseOnGrid, lattice: BrownianLattice, t: float) -> np.ndarray:
    """Physical-space forcing at a lattice time (path-dependent through W)."""
    return transform_backward(case_on_grid.forcing.at_time(lattice, t))


def _base_kwargs(nu, amplitude):
    return dict(
        nu=nu,
        amplitude=amplitude,
        velocity_shape=_taylor_green,
        velocity_coef=lambda t: 2.0 * np.cos(6.0 * t),
        velocity_coef_dt=lambda t: -12.0 * np.sin(6.0 * t),
        pressure_shape=_pressure_shape,
        pressure_coef=lambda t: np.asarray(t, dtype=np.float64) * 1.0,
    )


def taylor_green_case(nu=0.1, amplitude=4.0) -> ManufacturedCase:
    """Default Navier-Stokes case: Taylor-Green velocity, mixed-harmonic noise mode.

    The moderate viscosity keeps the matrix noise correction dynamically
    visible on coarse step ladders (its velocity effect scales like
    amplitude^2 / nu), which is what the ablation study measures.
    """
    return ManufacturedCase(
        name="taylor-green",
        stokes=False,
        noise_shapes=(_taylor_green_two_scale,),
        **_base_kwargs(nu, amplitude),
    )


def taylor_green_collinear_case(nu=1.0, amplitude=4.0) -> ManufacturedCase:
    """Noise mode collinear with the solution shape; the matrix correction then
    only moves the pressure (its divergence is a pure gradient)."""
    return ManufacturedCase(
        name="taylor-green-collinear",
        stokes=False,
        noise_shapes=(_taylor_green,),
        **_base_kwargs(nu, amplitude),
    )


def stokes_taylor_green_case(nu=1.0, amplitude=4.0) -> ManufacturedCase:
    return ManufacturedCase(
        name="stokes-taylor-green",
        stokes=True,
        noise_shapes=(_taylor_green,),
        **_base_kwargs(nu, amplitude),
    )


def four_mode_case(nu=1.0, amplitude=2.0) -> ManufacturedCase:
    """Four independent Wiener coordinates (quadrature cost scales as M K^2)."""
    return ManufacturedCase(
        name="taylor-green-4mode",
        stokes=False,
        noise_shapes=(_taylor_green, _taylor_green_rotated, _taylor_green_second, _anisotropic),
        **_base_kwargs(nu, amplitude),
    )


def taylor_green_decay_case(nu=0.05, amplitude=0.0) -> ManufacturedCase:
    """Free Taylor-Green decay: the unforced vortex with its exact pressure.

    The self-advection of the vortex is a pure gradient, so y = 2 e^{-8 pi^2
    nu t} g solves the unforced equations with p = -y-amplitude^2 times the
    advection potential; the assembled forcing is identically zero.
    """
    lam = 2 * TWO_PI**2

    def coef(t):
        return 2.0 * np.exp(-lam * nu * np.asarray(t, dtype=np.float64))

    return ManufacturedCase(
        name="taylor-green-decay",
        nu=nu,
        amplitude=amplitude,
        stokes=False,
        velocity_shape=_taylor_green,
        velocity_coef=coef,
        velocity_coef_dt=lambda t: -lam * nu * coef(t),
        pressure_shape=_pressure_shape,
        pressure_coef=lambda t: -(coef(t) ** 2),
        noise_shapes=(_taylor_green,),
    )


def quiescent_case(nu=1.0, amplitude=0.0) -> ManufacturedCase:
    """Fluid at rest; with a positive amplitude, flow driven from rest by noise."""
    zero = lambda t: np.zeros_like(np.asarray(t, dtype=np.float64))
    return ManufacturedCase(
        name="quiescent",
        nu=nu,
        amplitude=amplitude,
        stokes=False,
        velocity_shape=_taylor_green,
        velocity_coef=zero,
        velocity_coef_dt=zero,
        pressure_shape=_pressure_shape,
        pressure_coef=zero,
        noise_shapes=(_taylor_green,),
    )


CASES = {
    "taylor-green": taylor_green_case,
    "taylor-green-collinear": taylor_green_collinear_case,
    "stokes-taylor-green": stokes_taylor_green_case,
    "taylor-green-4mode": four_mode_case,
    "taylor-green-decay": taylor_green_decay_case,
    "quiescent": quiescent_case,
}


def case_names():
    return sorted(CASES)


def get_case(name: str, nu=None, amplitude=None) -> ManufacturedCase:
    if name not in CASES:
        raise ValueError(f"unknown case {name!r}; available: {', '.join(case_names())}")
    kwargs = {}
    if nu is not None:
        kwargs["nu"] = nu
    if amplitude is not None:
        kwargs["amplitude"] = amplitude
    return CASES[name](**kwargs)
