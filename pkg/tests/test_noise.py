"""Tests for Brownian lattices and the noise coefficient model."""

import numpy as np
import pytest

from sns2d.noise import (
    BrownianLattice,
    NoiseModel,
    sample_lattice,
    helmholtz_split,
    dump_lattice,
    load_lattice,
)
from sns2d.spectral import (
    Grid2D,
    field_from_function,
    gradient,
    l2_norm,
    max_divergence,
)

TWO_PI = 2.0 * np.pi


def tg_field(grid):
    return field_from_function(
        grid,
        lambda X, Y: np.stack(
            [np.cos(TWO_PI * X) * np.sin(TWO_PI * Y), -np.sin(TWO_PI * X) * np.cos(TWO_PI * Y)]
        ),
    )


class TestBrownianLattice:
    def test_determinism(self):
        a = sample_lattice(123, 1 / 256, 1.0, 3)
        b = sample_lattice(123, 1 / 256, 1.0, 3)
        assert np.array_equal(a.cumulative, b.cumulative)

    def test_different_seeds_differ(self):
        a = sample_lattice(1, 1 / 64, 1.0, 1)
        b = sample_lattice(2, 1 / 64, 1.0, 1)
        assert not np.allclose(a.cumulative, b.cumulative)

    def test_starts_at_zero(self):
        lat = sample_lattice(5, 1 / 64, 1.0, 4)
        assert np.all(lat.cumulative[:, 0] == 0.0)

    def test_point_count(self):
        lat = sample_lattice(5, 1 / 64, 1.0, 1)
        assert lat.n_points == 65

    def test_refinement_consistency(self):
        coarse = sample_lattice(77, 1 / 64, 1.0, 2)
        fine = sample_lattice(77, 1 / 512, 1.0, 2)
        shared = fine.cumulative[:, ::8]
        assert np.max(np.abs(shared - coarse.cumulative)) < 1e-12

    def test_terminal_variance(self):
        # W(T) ~ N(0, T); sample variance over 1e5 independent coordinates
        n = 100_000
        lat = sample_lattice(2024, 1 / 4, 1.0, n)
        wt = lat.cumulative[:, -1]
        var = np.var(wt)
        se = 1.0 * np.sqrt(2.0 / n)
        assert abs(var - 1.0) < 3 * se

    def test_increment_variance(self):
        lat = sample_lattice(99, 1 / 128, 1.0, 1000)
        inc = lat.increments.ravel()  # 128k draws
        delta = lat.delta
        se = delta * np.sqrt(2.0 / inc.size)
        assert abs(np.var(inc) - delta) < 5 * se

    def test_mode_independence(self):
        lat = sample_lattice(31, 1 / 4, 1.0, 20_000)
        wt = lat.cumulative[:, -1]
        # split modes into two halves and correlate
        half = wt.size // 2
        rho = np.corrcoef(wt[:half], wt[half : 2 * half])[0, 1]
        assert abs(rho) < 5.0 / np.sqrt(half)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            sample_lattice(0, -0.1, 1.0, 1)
        with pytest.raises(ValueError):
            sample_lattice(0, 0.1, -1.0, 1)
        with pytest.raises(ValueError):
            sample_lattice(0, 0.3, 1.0, 1)  # not dyadic
        with pytest.raises(ValueError):
            sample_lattice(0, 1 / 64, 1.0, 0)

    def test_micro_indices_require_divisibility(self):
        lat = sample_lattice(1, 1 / 256, 1.0, 1)
        idx = lat.micro_indices(0, 1 / 4)
        assert idx.size == 4 and idx[0] == 16 and idx[-1] == 64
        with pytest.raises(ValueError):
            lat.micro_indices(0, 1 / 3)

    def test_dump_load_round_trip(self, tmp_path):
        lat = sample_lattice(42, 1 / 128, 0.5, 3)
        path = tmp_path / "paths.blat"
        dump_lattice(lat, path)
        back = load_lattice(path)
        assert back.seed == lat.seed
        assert back.delta == lat.delta
        assert back.horizon == lat.horizon
        assert back.n_modes == lat.n_modes
        assert np.array_equal(back.increments, lat.increments)
        assert np.array_equal(back.cumulative, lat.cumulative)

    def test_load_rejects_garbage(self, tmp_path):
        path = tmp_path / "junk.blat"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(ValueError):
            load_lattice(path)


class TestNoiseModel:
    def test_solenoidal_tag_validated(self):
        g = Grid2D(32)
        grad_mode = gradient(field_from_function(g, lambda X, Y: np.cos(TWO_PI * X)))
        with pytest.raises(ValueError):
            NoiseModel(modes=[grad_mode], solenoidal=[True])
        model = NoiseModel(modes=[grad_mode], solenoidal=[False])
        assert model.n_modes == 1 and not model.all_solenoidal

    def test_auto_detects_solenoidal(self):
        g = Grid2D(32)
        model = NoiseModel(modes=[tg_field(g)])
        assert model.solenoidal == [True]

    def test_assemble_scales(self):
        g = Grid2D(32)
        mode = tg_field(g)
        model = NoiseModel(modes=[mode], amplitude=4.0)
        out = model.assemble(np.array([0.5]))
        assert np.max(np.abs(out.coeffs - 2.0 * mode.coeffs)) < 1e-14

    def test_assemble_shape_checked(self):
        g = Grid2D(16)
        model = NoiseModel(modes=[tg_field(g)])
        with pytest.raises(ValueError):
            model.assemble(np.zeros(2))


class TestHelmholtzSplit:
    def test_solenoidal_mode(self):
        g = Grid2D(32)
        model = NoiseModel(modes=[tg_field(g)])
        split = helmholtz_split(model)
        assert np.max(np.abs(split.psi[0].coeffs - model.modes[0].coeffs)) < 1e-13
        assert l2_norm(split.theta[0]) < 1e-12

    def test_pure_gradient_mode(self):
        g = Grid2D(32)
        mode = gradient(field_from_function(g, lambda X, Y: np.cos(TWO_PI * X)))
        split = helmholtz_split(NoiseModel(modes=[mode], solenoidal=[False]))
        assert l2_norm(split.psi[0]) < 1e-12

    def test_mixed_mode_reconstruction(self):
        g = Grid2D(32)
        mixed = tg_field(g) + gradient(field_from_function(g, lambda X, Y: np.sin(TWO_PI * Y)))
        model = NoiseModel(modes=[mixed], solenoidal=[False])
        split = helmholtz_split(model)
        recon = split.psi[0] + gradient(split.theta[0])
        assert np.max(np.abs(recon.coeffs - mixed.coeffs)) < 1e-12
        assert max_divergence(split.psi[0]) < 1e-12 * l2_norm(mixed)
