"""Brownian micro-mesh quadratures and their high-resolution oracles.

On each macro interval [t_n, t_{n+1}] of length tau the schemes need

* ``I_n^W``   -- right-endpoint average of W over the micro mesh of step tau^2,
* ``I_n^W2``  -- the matrix quadrature tau * sum_l (Z_l - Z_bar) (x) (Z_l - Z_bar)
  (one-loop form of the triple Riemann sum; cost O(M K^2) per step),
* correction scalars J_star, J_mid and the increment dW.

The matrix quantities are assembled as Gram-weighted combinations of the
pairwise mode outer products phi_k (x) phi_m, so the per-step cost is scalar
work plus a K^2 field combination; the outer-product fields are cached per
(noise, grid) in :class:`NoiseOnGrid`.  Oracles evaluate the corresponding
exact time averages by trapezoidal quadrature on the full lattice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .noise import BrownianLattice, NoiseModel
from .spectral import Grid2D, SpectralField, transform_backward

__all__ = [
    "quadrature_IW",
    "quadrature_IW2",
    "oracle_QW",
    "oracle_QW2",
    "corrections",
    "Corrections",
    "iw2_gram",
    "qw2_gram",
    "NoiseOnGrid",
]


def quadrature_IW(lattice: BrownianLattice, n: int, tau: float) -> np.ndarray:
    """Per-mode micro-mesh average scalars I_n^W (shape (K,))."""
    idx = lattice.micro_indices(n, tau)
    return tau * lattice.cumulative[:, idx].sum(axis=1)


def iw2_gram(lattice: BrownianLattice, n: int, tau: float) -> np.ndarray:
    """Symmetric PSD Gram matrix G with I_n^W2 = sum_{km} G_km phi_k (x) phi_m."""
    idx = lattice.micro_indices(n, tau)
    iw = tau * lattice.cumulative[:, idx].sum(axis=1)
    A = lattice.cumulative[:, idx] - iw[:, None]
    G = tau * (A @ A.T)
    return 0.5 * (G + G.T)


def oracle_QW(lattice: BrownianLattice, n: int, tau: float) -> np.ndarray:
    """Trapezoidal lattice estimate of the exact interval average of W."""
    _require_fine(lattice, tau)
    ts, vals = lattice.segment(n, tau)
    return np.trapezoid(vals, ts, axis=1) / tau


def qw2_gram(lattice: BrownianLattice, n: int, tau: float) -> np.ndarray:
    """Gram matrix of the reduced double-integral form of the triple integral."""
    _require_fine(lattice, tau)
    ts, vals = lattice.segment(n, tau)
    q = np.trapezoid(vals, ts, axis=1) / tau
    B = vals - q[:, None]
    w = np.full(ts.size, lattice.delta)
    w[0] = w[-1] = 0.5 * lattice.delta  # trapezoid weights
    G = (B * w) @ B.T / tau
    return 0.5 * (G + G.T)


def _require_fine(lattice: BrownianLattice, tau: float):
    if lattice.delta >= tau * tau:
        raise ValueError(
            f"lattice delta {lattice.delta:g} must be finer than the micro step {tau * tau:g}"
        )


@dataclass
class Corrections:
    """Per-mode correction scalars for the SPDE form of the scheme."""

    j_star: np.ndarray  # I_n^W - (3/2) W(t_n) + (1/2) W(t_{n-1})
    j_mid: np.ndarray  # I_n^W - (1/2) (W(t_{n+1}) + W(t_n))
    d_w: np.ndarray  # W(t_{n+1}) - W(t_n)


def corrections(lattice: BrownianLattice, n: int, tau: float) -> Corrections:
    """Exact algebraic combinations of lattice values; W(t_{-1}) = W(0) = 0."""
    iw = quadrature_IW(lattice, n, tau)
    w_n = lattice.values_at_index(lattice.index_at(n * tau))
    w_np1 = lattice.values_at_index(lattice.index_at((n + 1) * tau))
    if n == 0:
        w_nm1 = np.zeros_like(w_n)
    else:
        w_nm1 = lattice.values_at_index(lattice.index_at((n - 1) * tau))
    return Corrections(
        j_star=iw - 1.5 * w_n + 0.5 * w_nm1,
        j_mid=iw - 0.5 * (w_np1 + w_n),
        d_w=w_np1 - w_n,
    )


class NoiseOnGrid:
    """Noise modes materialized on a grid, with cached pairwise outer products.

    The cache holds, per mode pair (k, m), the spectral outer-product tensor
    phi_k (x) phi_m and its row-wise divergence, computed once from dealiased
    pointwise products.  Assembling I_n^W2 or its divergence is then a Gram
    combination, so a step costs O(M K^2) scalar work as advertised.
    """

    def __init__(self, noise: NoiseModel, grid: Grid2D, dealias: bool = True):
        if noise.grid != grid:
            raise ValueError("noise modes live on a different grid")
        self.noise = noise
        self.grid = grid
        self.dealias = dealias
        self._phys = None
        self._outer = None
        self._outer_div = None

    def _mode_phys(self):
        if self._phys is None:
            mask = self.grid.dealias_mask
            self._phys = [
                transform_backward(
                    SpectralField(self.grid, m.coeffs * mask if self.dealias else m.coeffs)
                )
                for m in self.noise.modes
            ]
        return self._phys

    def _outer_fields(self):
        if self._outer is None:
            from .spectral import tensor_divergence, transform_forward

            phys = self._mode_phys()
            K = self.noise.n_modes
            outer = {}
            outer_div = {}
            mask = self.grid.dealias_mask
            for k in range(K):
                for m in range(k, K):
                    T_phys = np.einsum("ixy,jxy->ijxy", phys[k], phys[m])
                    T = transform_forward(self.grid, T_phys)
                    if self.dealias:
                        T = SpectralField(self.grid, T.coeffs * mask)
                    outer[(k, m)] = T
                    dv = tensor_divergence(T)
                    if m != k:
                        swapped = SpectralField(self.grid, T.coeffs.transpose(1, 0, 2, 3))
                        dv = dv + tensor_divergence(swapped)
                    outer_div[(k, m)] = dv  # for k < m: the symmetric pair sum
            self._outer = outer
            self._outer_div = outer_div
        return self._outer, self._outer_div

    def assemble(self, weights: np.ndarray) -> SpectralField:
        return self.noise.assemble(weights)

    def _check_gram(self, gram):
        K = self.noise.n_modes
        gram = np.asarray(gram, dtype=np.float64)
        if gram.shape != (K, K):
            raise ValueError(f"gram must be {K}x{K}")
        if np.max(np.abs(gram - gram.T)) > 1e-12 * max(np.max(np.abs(gram)), 1e-300):
            raise ValueError("gram matrix must be symmetric")
        return gram

    def assemble_iw2(self, gram: np.ndarray) -> SpectralField:
        """Matrix field sum_{km} amp^2 * gram[k, m] * phi_k (x) phi_m."""
        gram = self._check_gram(gram)
        outer, _ = self._outer_fields()
        K = self.noise.n_modes
        n = self.grid.n
        acc = np.zeros((2, 2, n, n), dtype=np.complex128)
        for k in range(K):
            acc += gram[k, k] * outer[(k, k)].coeffs
            for m in range(k + 1, K):
                pair = outer[(k, m)].coeffs
                acc += gram[k, m] * (pair + pair.transpose(1, 0, 2, 3))
        return SpectralField(self.grid, self.noise.amplitude**2 * acc)

    def assemble_iw2_divergence(self, gram: np.ndarray) -> SpectralField:
        gram = self._check_gram(gram)
        _, outer_div = self._outer_fields()
        K = self.noise.n_modes
        n = self.grid.n
        acc = np.zeros((2, n, n), dtype=np.complex128)
        for k in range(K):
            for m in range(k, K):
                acc += gram[k, m] * outer_div[(k, m)].coeffs
        return SpectralField(self.grid, self.noise.amplitude**2 * acc)


def quadrature_IW2(
    lattice: BrownianLattice, noise: NoiseModel, n: int, tau: float, cache: NoiseOnGrid = None
) -> SpectralField:
    """Symmetric, pointwise-PSD matrix field I_n^W2 on the noise grid."""
    if cache is None:
        cache = NoiseOnGrid(noise, noise.grid)
    return cache.assemble_iw2(iw2_gram(lattice, n, tau))


def oracle_QW2(
    lattice: BrownianLattice, noise: NoiseModel, n: int, tau: float, cache: NoiseOnGrid = None
) -> SpectralField:
    """Lattice-resolution ground truth for the matrix triple integral."""
    if cache is None:
        cache = NoiseOnGrid(noise, noise.grid)
    return cache.assemble_iw2(qw2_gram(lattice, n, tau))
