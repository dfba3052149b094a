# %% [markdown]
# # Spectral toolbox on the periodic torus
#
# Walks through the building blocks: Fourier fields on [0,1)^2, exact
# differential operators, the Helmholtz-Leray decomposition, and the
# dealiased transport form with its energy cancellation.

# %%
import numpy as np

from sns2d.spectral import (
    Grid2D,
    SpectralField,
    convect,
    divergence,
    field_from_function,
    gradient,
    inner_product,
    l2_norm,
    laplacian,
    leray_project,
    norms,
    scalar_potential,
    transform_backward,
    transform_forward,
)

TWO_PI = 2 * np.pi
grid = Grid2D(64)

# %% [markdown]
# A single Fourier mode round-trips exactly and the Laplacian acts as the
# eigenvalue -|k|^2.

# %%
f = field_from_function(grid, lambda X, Y: np.cos(TWO_PI * X) * np.sin(2 * TWO_PI * Y))
print("norms:", norms(f))
lap = laplacian(f)
print("eigenvalue check:", l2_norm(lap + (TWO_PI**2 + 4 * TWO_PI**2) * f))

# %% [markdown]
# Helmholtz decomposition: any vector field splits into a divergence-free
# part plus a gradient, reconstructed exactly.

# %%
rng = np.random.default_rng(1)
v = transform_forward(grid, rng.standard_normal((2, grid.n, grid.n)))
sol = leray_project(v)
pot = scalar_potential(v)
recon = sol + gradient(pot)
print("divergence of projection:", l2_norm(divergence(sol)))
print("reconstruction defect:", np.max(np.abs(recon.coeffs - v.coeffs)))

# %% [markdown]
# Transport-form energy cancellation: for a solenoidal advecting field the
# convection term does no work on any transported field.  With the 2/3
# dealiasing rule this holds to rounding for the discrete operator too.

# %%
psi = field_from_function(grid, lambda X, Y: np.cos(TWO_PI * X) * np.cos(TWO_PI * Y))
gpsi = gradient(psi)
a = SpectralField(grid, np.stack([-gpsi.coeffs[1], gpsi.coeffs[0]]))  # curl of a stream function
w = transform_forward(grid, rng.standard_normal((2, grid.n, grid.n)))
print("<(a.grad)w, w> =", inner_product(convect(a, w), w))

# %% [markdown]
# Taylor-Green self-advection is a pure gradient, one reason the vortex is an
# exact Navier-Stokes solution.

# %%
tg = field_from_function(
    grid,
    lambda X, Y: np.stack(
        [np.cos(TWO_PI * X) * np.sin(TWO_PI * Y), -np.sin(TWO_PI * X) * np.cos(TWO_PI * Y)]
    ),
)
adv = convect(tg, tg)
print("projected self-advection:", l2_norm(leray_project(adv)), " raw:", l2_norm(adv))
