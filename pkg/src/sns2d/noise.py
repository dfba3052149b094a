"""Driving noise: finite-mode coefficients and seeded Brownian lattices.

A study generates one :class:`BrownianLattice` per sample path on a global
fine time grid and every time step size reads the same path, so that strong
errors at different step sizes are measured against a common realization.

Lattices are built by dyadic Brownian-bridge subdivision with one dedicated
random stream per subdivision level (drawn as a block across modes).
Consequences:

* identical (seed, delta, horizon, n_modes) reproduce the lattice bitwise;
* halving delta with the same seed appends one subdivision level and leaves
  all values at shared times unchanged;
* modes are mutually independent i.i.d. coordinates.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .spectral import (
    Grid2D,
    SpectralField,
    l2_norm,
    leray_project,
    max_divergence,
    scalar_potential,
    hermitian_defect,
)

__all__ = [
    "NoiseModel",
    "NoiseSplit",
    "BrownianLattice",
    "sample_lattice",
    "helmholtz_split",
    "dump_lattice",
    "load_lattice",
]

_MAGIC = b"BLAT"
_VERSION = 1


@dataclass
class NoiseModel:
    """Additive noise coefficient: amplitude * sum_k W_k(t) * modes[k](x)."""

    modes: list  # vector SpectralField per Wiener coordinate
    amplitude: float = 1.0
    solenoidal: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.modes) < 1:
            raise ValueError("noise model needs at least one mode")
        if not self.solenoidal:
            self.solenoidal = [max_divergence(m) <= 1e-12 * max(l2_norm(m), 1e-300) for m in self.modes]
        if len(self.solenoidal) != len(self.modes):
            raise ValueError("solenoidal flags do not match mode count")
        for j, (m, sol) in enumerate(zip(self.modes, self.solenoidal)):
            if m.rank != 1:
                raise ValueError(f"mode {j} is not a vector field")
            if hermitian_defect(m) > 1e-12:
                raise ValueError(f"mode {j} is not a real field")
            if sol and max_divergence(m) > 1e-12 * max(l2_norm(m), 1e-300):
                raise ValueError(f"mode {j} tagged solenoidal but has divergence")

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def grid(self) -> Grid2D:
        return self.modes[0].grid

    @property
    def all_solenoidal(self) -> bool:
        return all(self.solenoidal)

    def assemble(self, weights: np.ndarray) -> SpectralField:
        """Field amplitude * sum_k weights[k] * modes[k]."""
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (self.n_modes,):
            raise ValueError(f"expected {self.n_modes} weights, got shape {weights.shape}")
        out = np.zeros_like(self.modes[0].coeffs)
        for w, m in zip(weights, self.modes):
            out += w * m.coeffs
        return SpectralField(self.grid, self.amplitude * out)


@dataclass
class NoiseSplit:
    """Per-mode Helmholtz split: mode = psi + grad(theta)."""

    psi: list  # solenoidal vector fields
    theta: list  # mean-zero scalar potentials

    def solenoidal_model(self, noise: NoiseModel) -> NoiseModel:
        return NoiseModel(modes=self.psi, amplitude=noise.amplitude, solenoidal=[True] * len(self.psi))

    def theta_field(self, noise: NoiseModel, weights: np.ndarray) -> SpectralField:
        weights = np.asarray(weights, dtype=np.float64)
        out = np.zeros_like(self.theta[0].coeffs)
        for w, th in zip(weights, self.theta):
            out += w * th.coeffs
        return SpectralField(self.theta[0].grid, noise.amplitude * out)


def helmholtz_split(noise: NoiseModel) -> NoiseSplit:
    psi = [leray_project(m) for m in noise.modes]
    theta = [scalar_potential(m) for m in noise.modes]
    return NoiseSplit(psi=psi, theta=theta)


class BrownianLattice:
    """Realizations of n_modes independent Wiener coordinates on a fine grid.

    ``cumulative[k, i]`` is W_k at time i*delta, with W_k(0) = 0; increments
    are i.i.d. N(0, delta) and modes are mutually independent.
    """

    def __init__(self, seed: int, delta: float, horizon: float, n_modes: int, *, _increments=None):
        if delta <= 0 or horizon <= 0:
            raise ValueError("delta and horizon must be positive")
        if n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        levels = round(np.log2(horizon / delta))
        if levels < 0 or abs(horizon / delta - 2**levels) > 1e-9:
            raise ValueError(
                f"horizon/delta = {horizon / delta:g} must be a power of two "
                "(dyadic lattice, required for exact micro-mesh nesting)"
            )
        self.seed = int(seed)
        self.delta = float(delta)
        self.horizon = float(horizon)
        self.n_modes = int(n_modes)
        self.n_points = 2**levels + 1

        if _increments is None:
            values = _bridge_sample(self.seed, self.horizon, levels, self.n_modes)
            _increments = np.diff(values, axis=1)
        else:
            _increments = np.asarray(_increments, dtype=np.float64)
            if _increments.shape != (self.n_modes, self.n_points - 1):
                raise ValueError("increment array shape mismatch")
        self.increments = _increments
        cum = np.empty((self.n_modes, self.n_points))
        cum[:, 0] = 0.0
        np.cumsum(self.increments, axis=1, out=cum[:, 1:])
        self.cumulative = cum

    @classmethod
    def from_increments(cls, increments: np.ndarray, delta: float, seed: int = 0) -> "BrownianLattice":
        """Build a lattice from explicit increments (deterministic test paths)."""
        increments = np.atleast_2d(np.asarray(increments, dtype=np.float64))
        horizon = delta * increments.shape[1]
        return cls(seed, delta, horizon, increments.shape[0], _increments=increments)

    def times(self) -> np.ndarray:
        return np.arange(self.n_points) * self.delta

    def index_at(self, t: float) -> int:
        i = round(t / self.delta)
        if i < 0 or i >= self.n_points or abs(i * self.delta - t) > 1e-9 * max(self.delta, abs(t)):
            raise ValueError(f"time {t} is not a lattice point (delta={self.delta})")
        return i

    def stride_of(self, dt: float) -> int:
        s = round(dt / self.delta)
        if s < 1 or abs(s * self.delta - dt) > 1e-9 * dt:
            raise ValueError(f"step {dt} is not an integer multiple of lattice delta {self.delta}")
        return s

    def values_at_index(self, i) -> np.ndarray:
        return self.cumulative[:, i]

    def micro_indices(self, n: int, tau: float) -> np.ndarray:
        """Lattice indices of the micro mesh t_n + l*tau^2, l = 1..M, M = 1/tau."""
        M = round(1.0 / tau)
        if abs(M * tau - 1.0) > 1e-9:
            raise ValueError(f"1/tau = {1.0 / tau:g} must be an integer")
        start = self.index_at(n * tau)
        stride = self.stride_of(tau * tau)
        idx = start + stride * np.arange(1, M + 1)
        if idx[-1] >= self.n_points:
            raise ValueError(f"macro interval {n} at tau={tau} exceeds the lattice horizon")
        return idx

    def segment(self, n: int, tau: float) -> tuple:
        """(times, values) on the closed lattice interval [t_n, t_{n+1}]."""
        i0 = self.index_at(n * tau)
        i1 = self.index_at((n + 1) * tau)
        return self.times()[i0 : i1 + 1], self.cumulative[:, i0 : i1 + 1]


def _bridge_sample(seed: int, horizon: float, levels: int, n_modes: int) -> np.ndarray:
    """Dyadic midpoint construction with one seeded stream per subdivision level.

    Level 0 draws W(horizon) for every mode; level lev >= 1 draws the bridge
    midpoints that halve the current spacing.  A finer lattice consumes extra
    levels and leaves all coarser-level draws unchanged, which is what makes
    refinement reproduce values at shared times.
    """
    streams = np.random.SeedSequence(seed).spawn(levels + 1)
    gen0 = np.random.Generator(np.random.PCG64(streams[0]))
    w = np.zeros((n_modes, 2))
    w[:, 1] = np.sqrt(horizon) * gen0.standard_normal(n_modes)
    for lev in range(1, levels + 1):
        h = horizon / 2 ** (lev - 1)  # spacing before subdivision
        gen = np.random.Generator(np.random.PCG64(streams[lev]))
        draws = gen.standard_normal((n_modes, w.shape[1] - 1))
        mids = 0.5 * (w[:, :-1] + w[:, 1:]) + 0.5 * np.sqrt(h) * draws
        merged = np.empty((n_modes, 2 * w.shape[1] - 1))
        merged[:, ::2] = w
        merged[:, 1::2] = mids
        w = merged
    return w


def sample_lattice(seed: int, delta: float, horizon: float, n_modes: int) -> BrownianLattice:
    """Seeded Brownian paths on a dyadic lattice of step delta over [0, horizon]."""
    return BrownianLattice(seed, delta, horizon, n_modes)


def dump_lattice(lattice: BrownianLattice, path) -> None:
    """Versioned little-endian binary dump (magic, version, header, increments)."""
    header = struct.pack(
        "<4sBQddI",
        _MAGIC,
        _VERSION,
        lattice.seed % 2**64,
        lattice.delta,
        lattice.horizon,
        lattice.n_modes,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(lattice.increments.astype("<f8").tobytes())


def load_lattice(path) -> BrownianLattice:
    with open(path, "rb") as fh:
        head = fh.read(struct.calcsize("<4sBQddI"))
        magic, version, seed, delta, horizon, n_modes = struct.unpack("<4sBQddI", head)
        if magic != _MAGIC:
            raise ValueError("not a Brownian lattice file")
        if version != _VERSION:
            raise ValueError(f"unsupported lattice file version {version}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    n_inc = round(horizon / delta)
    inc = data.reshape(n_modes, n_inc)
    lat = BrownianLattice(seed, delta, horizon, n_modes, _increments=inc.copy())
    return lat
