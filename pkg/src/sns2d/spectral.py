"""Fourier representation of real periodic fields on the unit torus [0,1)^2.

Fields are stored as complex coefficient arrays normalized so that
``coeffs[0, 0]`` is the mean value and Parseval gives the L2 norm directly:
``||f||^2 = sum_k |f_k|^2``.  Scalar fields have coefficient shape (n, n),
vector fields (2, n, n) and 2x2 tensor fields (2, 2, n, n), with the x
wavenumber on axis -2 and the y wavenumber on axis -1.

First-order derivative operators (gradient, divergence, convection) zero the
Nyquist row/column; the Helmholtz-Leray projection treats those modes as
neutral so that the decomposition v = P v + grad Q(v) is exact for every
field.  The Laplacian and its mean-zero inverse act on the full spectrum.
Quadratic products use the 2/3 truncation rule, which makes the discrete
transport form alias-free and its cancellation properties exact to rounding.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Grid2D",
    "SpectralField",
    "transform_forward",
    "transform_backward",
    "field_from_function",
    "zeros_field",
    "laplacian",
    "inv_laplacian_meanzero",
    "gradient",
    "divergence",
    "tensor_divergence",
    "leray_project",
    "scalar_potential",
    "convect",
    "convect_skew",
    "dealias_truncate",
    "inner_product",
    "l2_norm",
    "h1_seminorm",
    "norms",
    "max_divergence",
    "hermitian_defect",
]

_RANK_NDIM = {0: 2, 1: 3, 2: 4}


class Grid2D:
    """Uniform n x n collocation grid on [0,1)^2 with 2*pi-scaled wavenumbers."""

    def __init__(self, modes_per_dim: int):
        n = int(modes_per_dim)
        if n < 4 or n % 2 != 0:
            raise ValueError(f"modes_per_dim must be even and >= 4, got {modes_per_dim}")
        self.n = n

        k = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)  # 0..n/2-1, -n/2..-1
        self.k_int = k
        k_deriv = k.copy()
        k_deriv[np.abs(k) == n // 2] = 0  # Nyquist excluded from odd derivatives

        two_pi = 2.0 * np.pi
        # derivative multipliers, broadcastable over (..., n, n)
        self.dx_fac = 1j * two_pi * k_deriv[:, None].astype(np.float64)
        self.dy_fac = 1j * two_pi * k_deriv[None, :].astype(np.float64)
        # full |k|^2 for the (even) Laplacian
        self.k2_full = (two_pi**2) * (
            k[:, None].astype(np.float64) ** 2 + k[None, :].astype(np.float64) ** 2
        )
        inv = np.zeros_like(self.k2_full)
        nz = self.k2_full > 0
        inv[nz] = 1.0 / self.k2_full[nz]
        self.inv_k2_full = inv
        # Nyquist-consistent wavenumbers for the Helmholtz structure
        self.kx_proj = two_pi * k_deriv[:, None].astype(np.float64) * np.ones((1, n))
        self.ky_proj = two_pi * np.ones((n, 1)) * k_deriv[None, :].astype(np.float64)
        k2p = self.kx_proj**2 + self.ky_proj**2
        invp = np.zeros_like(k2p)
        nzp = k2p > 0
        invp[nzp] = 1.0 / k2p[nzp]
        self.inv_k2_proj = invp

        cutoff = (n - 1) // 3  # 3*cutoff < n keeps triple products alias-free
        self.dealias_cutoff = cutoff
        keep = np.abs(k) <= cutoff
        self.dealias_mask = keep[:, None] & keep[None, :]

        x = np.arange(n) / n
        self._mesh = np.meshgrid(x, x, indexing="ij")

    def meshgrid(self):
        """Physical coordinates (X, Y), each of shape (n, n)."""
        return self._mesh

    def __eq__(self, other):
        return isinstance(other, Grid2D) and other.n == self.n

    def __hash__(self):
        return hash(("Grid2D", self.n))

    def __repr__(self):
        return f"Grid2D(modes_per_dim={self.n})"


class SpectralField:
    """Fourier coefficients of a real scalar/vector/tensor field on a Grid2D."""

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: Grid2D, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.ndim not in (2, 3, 4) or coeffs.shape[-2:] != (grid.n, grid.n):
            raise ValueError(f"coefficient shape {coeffs.shape} does not match grid n={grid.n}")
        if coeffs.ndim == 3 and coeffs.shape[0] != 2:
            raise ValueError("vector fields must have 2 components")
        if coeffs.ndim == 4 and coeffs.shape[:2] != (2, 2):
            raise ValueError("tensor fields must be 2x2")
        self.grid = grid
        self.coeffs = coeffs

    @property
    def rank(self) -> int:
        """0 for scalar, 1 for vector, 2 for 2x2 tensor."""
        return self.coeffs.ndim - 2

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def mean_value(self) -> np.ndarray:
        """Mean of the field over the torus, per component."""
        return self.coeffs[..., 0, 0].real

    def to_physical(self) -> np.ndarray:
        return transform_backward(self)

    def __add__(self, other):
        _check_same(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _check_same(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, c):
        return SpectralField(self.grid, self.coeffs * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def __repr__(self):
        kind = {0: "scalar", 1: "vector", 2: "tensor"}[self.rank]
        return f"SpectralField({kind}, n={self.grid.n})"


def _check_same(a: SpectralField, b: SpectralField):
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    if a.coeffs.shape != b.coeffs.shape:
        raise ValueError(f"rank mismatch: {a.coeffs.shape} vs {b.coeffs.shape}")


def _check_rank(f: SpectralField, rank: int, what: str):
    if f.rank != rank:
        raise ValueError(f"{what} expects rank-{rank} field, got rank {f.rank}")


def transform_forward(grid: Grid2D, values: np.ndarray) -> SpectralField:
    """Real physical samples -> spectral coefficients (mean-normalized)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim not in (2, 3, 4) or values.shape[-2:] != (grid.n, grid.n):
        raise ValueError(f"physical array shape {values.shape} does not match grid n={grid.n}")
    coeffs = np.fft.fft2(values) / grid.n**2
    return SpectralField(grid, coeffs)


def transform_backward(field: SpectralField) -> np.ndarray:
    """Spectral coefficients -> real physical samples."""
    return np.fft.ifft2(field.coeffs).real * field.grid.n**2


def hermitian_defect(field: SpectralField) -> float:
    """Max imaginary part of the inverse transform relative to the field size."""
    phys = np.fft.ifft2(field.coeffs) * field.grid.n**2
    scale = max(np.max(np.abs(phys.real)), 1e-300)
    return float(np.max(np.abs(phys.imag)) / scale)


def field_from_function(grid: Grid2D, fn) -> SpectralField:
    """Sample fn(X, Y) on the grid and transform; fn may return stacked components."""
    X, Y = grid.meshgrid()
    return transform_forward(grid, np.asarray(fn(X, Y)))


def zeros_field(grid: Grid2D, rank: int = 0) -> SpectralField:
    shape = {0: (), 1: (2,), 2: (2, 2)}[rank] + (grid.n, grid.n)
    return SpectralField(grid, np.zeros(shape, dtype=np.complex128))


def laplacian(f: SpectralField) -> SpectralField:
    if f.rank == 2:
        raise ValueError("laplacian expects a scalar or vector field")
    return SpectralField(f.grid, f.coeffs * (-f.grid.k2_full))


def inv_laplacian_meanzero(f: SpectralField, mean_tol: float = 1e-10) -> SpectralField:
    """Invert the Laplacian on mean-zero fields; rejects inputs with a mean."""
    if f.rank == 2:
        raise ValueError("inv_laplacian_meanzero expects a scalar or vector field")
    size = l2_norm(f)
    mean = np.max(np.abs(f.coeffs[..., 0, 0]))
    if mean > mean_tol * max(size, 1e-300):
        raise ValueError(f"inv_laplacian_meanzero: input has nonzero mean {mean:.3e}")
    out = f.coeffs * (-f.grid.inv_k2_full)
    out[..., 0, 0] = 0.0
    return SpectralField(f.grid, out)


def gradient(f: SpectralField) -> SpectralField:
    _check_rank(f, 0, "gradient")
    g = f.grid
    return SpectralField(g, np.stack([g.dx_fac * f.coeffs, g.dy_fac * f.coeffs]))


def divergence(v: SpectralField) -> SpectralField:
    _check_rank(v, 1, "divergence")
    g = v.grid
    return SpectralField(g, g.dx_fac * v.coeffs[0] + g.dy_fac * v.coeffs[1])


def tensor_divergence(T: SpectralField) -> SpectralField:
    """Row-wise divergence: component i is sum_j d_j T[i, j]."""
    _check_rank(T, 2, "tensor_divergence")
    g = T.grid
    out = np.stack(
        [
            g.dx_fac * T.coeffs[0, 0] + g.dy_fac * T.coeffs[0, 1],
            g.dx_fac * T.coeffs[1, 0] + g.dy_fac * T.coeffs[1, 1],
        ]
    )
    return SpectralField(g, out)


def leray_project(v: SpectralField) -> SpectralField:
    """Remove the gradient part of a vector field, mode by mode."""
    _check_rank(v, 1, "leray_project")
    g = v.grid
    dot = g.kx_proj * v.coeffs[0] + g.ky_proj * v.coeffs[1]
    lam = dot * g.inv_k2_proj
    out = np.stack([v.coeffs[0] - g.kx_proj * lam, v.coeffs[1] - g.ky_proj * lam])
    return SpectralField(g, out)


def scalar_potential(v: SpectralField) -> SpectralField:
    """Mean-zero scalar Q with v = leray_project(v) + gradient(Q)."""
    _check_rank(v, 1, "scalar_potential")
    g = v.grid
    divh = g.dx_fac * v.coeffs[0] + g.dy_fac * v.coeffs[1]
    q = divh * (-g.inv_k2_proj)
    q[0, 0] = 0.0
    return SpectralField(g, q)


def dealias_truncate(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, f.coeffs * f.grid.dealias_mask)


def _phys(coeffs: np.ndarray, n: int) -> np.ndarray:
    return np.fft.ifft2(coeffs).real * n**2


def convect(a: SpectralField, b: SpectralField, dealias: bool = True) -> SpectralField:
    """Transport term (a . grad) b via pointwise products in physical space."""
    _check_rank(a, 1, "convect")
    _check_rank(b, 1, "convect")
    _check_same(a, b)
    g = a.grid
    mask = g.dealias_mask
    ah = a.coeffs * mask if dealias else a.coeffs
    bh = b.coeffs * mask if dealias else b.coeffs

    a_phys = _phys(ah, g.n)
    db = np.stack([g.dx_fac * bh, g.dy_fac * bh])  # db[j, i] = d_j b_i
    db_phys = _phys(db, g.n)
    out_phys = a_phys[0] * db_phys[0] + a_phys[1] * db_phys[1]
    out = np.fft.fft2(out_phys) / g.n**2
    if dealias:
        out = out * mask
    return SpectralField(g, out)


def convect_skew(a: SpectralField, b: SpectralField, dealias: bool = True) -> SpectralField:
    """Skew transport operator S with <S(a,b), c> = (C(a,b,c) - C(a,c,b)) / 2.

    The pairing against b vanishes identically (to rounding), for any a,
    which is what gives backward Euler steps a discrete energy law.
    """
    _check_rank(a, 1, "convect_skew")
    _check_rank(b, 1, "convect_skew")
    _check_same(a, b)
    g = a.grid
    mask = g.dealias_mask
    ah = a.coeffs * mask if dealias else a.coeffs
    bh = b.coeffs * mask if dealias else b.coeffs

    a_phys = _phys(ah, g.n)
    b_phys = _phys(bh, g.n)
    db = np.stack([g.dx_fac * bh, g.dy_fac * bh])
    db_phys = _phys(db, g.n)

    conv_phys = a_phys[0] * db_phys[0] + a_phys[1] * db_phys[1]
    conv_h = np.fft.fft2(conv_phys) / g.n**2

    # adjoint route: <D, c> = C(a, c, b) with D_i = -d_j (a_j b_i)
    prod = a_phys[None, :, :, :] * b_phys[:, None, :, :]  # prod[i, j] = b_i a_j
    prod_h = np.fft.fft2(prod) / g.n**2
    div_h = g.dx_fac * prod_h[:, 0] + g.dy_fac * prod_h[:, 1]

    out = 0.5 * (conv_h + div_h)
    if dealias:
        out = out * mask
    return SpectralField(g, out)


def inner_product(f: SpectralField, g: SpectralField) -> float:
    """L2 inner product over the torus (all components summed)."""
    _check_same(f, g)
    return float(np.vdot(g.coeffs, f.coeffs).real)


def l2_norm(f: SpectralField) -> float:
    return float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))


def h1_seminorm(f: SpectralField) -> float:
    g = f.grid
    w = np.abs(g.dx_fac) ** 2 + np.abs(g.dy_fac) ** 2
    return float(np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2)))


def norms(f: SpectralField) -> dict:
    """Parseval L2 norm and gradient seminorm."""
    return {"l2": l2_norm(f), "h1_semi": h1_seminorm(f)}


def max_divergence(v: SpectralField) -> float:
    """Largest |k . v_hat(k)| over all modes (Nyquist-consistent)."""
    _check_rank(v, 1, "max_divergence")
    g = v.grid
    return float(np.max(np.abs(g.kx_proj * v.coeffs[0] + g.ky_proj * v.coeffs[1])))
