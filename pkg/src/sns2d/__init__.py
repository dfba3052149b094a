"""Pseudo-spectral integrators for 2D stochastic Navier-Stokes/Stokes flow with additive noise."""

from .harness import ErrorTable, StudyConfig, estimate_rate, run_study
from .manufactured import CASES, ManufacturedCase, case_names, get_case
from .noise import BrownianLattice, NoiseModel, helmholtz_split, sample_lattice
from .quadrature import corrections, oracle_QW, oracle_QW2, quadrature_IW, quadrature_IW2
from .schemes import (
    VARIANTS,
    SchemeConfig,
    SchemeState,
    SolverError,
    TimeStepper,
    recover_pressure,
    solve_linear_step,
)
from .spectral import (
    Grid2D,
    SpectralField,
    convect,
    convect_skew,
    divergence,
    gradient,
    h1_seminorm,
    inner_product,
    inv_laplacian_meanzero,
    l2_norm,
    laplacian,
    leray_project,
    norms,
    scalar_potential,
    tensor_divergence,
    transform_backward,
    transform_forward,
)

__version__ = "0.1.0"
