import numpy as np
import pytest

import otflux as of
from otflux.errors import ValidationError
from otflux.spatial import _div_stack, _grad_stack

from oracles import power_iteration_bound


def random_flux(rng, n, payload=()):
    ux = rng.normal(size=(n, n) + payload)
    uy = rng.normal(size=(n, n) + payload)
    ux[-1, :] = 0
    uy[:, -1] = 0
    return of.FluxField(ux, uy)


class TestDiv:
    def test_zero_flux(self):
        grid = of.GridSpec(5)
        u = of.FluxField.zeros(grid)
        assert np.all(of.div_x(u, grid) == 0)

    def test_single_face(self):
        # n=3, dx=0.5: one unit x-face at (0,0) gives +2 / -2 in its two cells
        grid = of.GridSpec(3)
        ux = np.zeros((3, 3))
        ux[0, 0] = 1.0
        u = of.FluxField(ux, np.zeros((3, 3)))
        d = of.div_x(u, grid)
        assert d[0, 0] == pytest.approx(2.0)
        assert d[1, 0] == pytest.approx(-2.0)
        assert np.count_nonzero(d) == 2

    def test_mass_conservation(self, rng):
        grid = of.GridSpec(8)
        for _ in range(20):
            u = random_flux(rng, 8)
            assert abs(of.div_x(u, grid).sum()) < 1e-12

    def test_mass_conservation_matrix_payload(self, rng):
        grid = of.GridSpec(6)
        u = random_flux(rng, 6, payload=(3, 3))
        d = of.div_x(u, grid)
        assert abs(np.trace(d.sum(axis=(0, 1)))) < 1e-12

    def test_ghost_violation_rejected(self):
        grid = of.GridSpec(3)
        ux = np.zeros((3, 3))
        ux[-1, 0] = 1.0
        with pytest.raises(ValidationError):
            of.div_x((ux, np.zeros((3, 3))), grid)


class TestGrad:
    def test_constant_field(self):
        grid = of.GridSpec(7)
        g = of.grad_x(np.full((7, 7), 3.25), grid)
        assert np.all(g.ux == 0) and np.all(g.uy == 0)

    def test_linear_slope(self):
        grid = of.GridSpec(9)
        x = grid.coords()
        phi = 2.5 * x[:, None] + 0.0 * x[None, :]
        g = of.grad_x(phi, grid)
        assert np.allclose(g.ux[:-1, :], 2.5)
        assert np.all(g.ux[-1, :] == 0)
        assert np.allclose(g.uy, 0)

    def test_ghost_rows_zero(self, rng):
        grid = of.GridSpec(6)
        g = of.grad_x(rng.normal(size=(6, 6)), grid)
        assert np.all(g.ux[-1, :] == 0) and np.all(g.uy[:, -1] == 0)


class TestAdjointness:
    @pytest.mark.parametrize("payload", [(), (3,), (2, 2)])
    def test_random_cases(self, rng, payload):
        grid = of.GridSpec(10)
        for _ in range(50):
            phi = rng.normal(size=(10, 10) + payload)
            u = random_flux(rng, 10, payload)
            g = of.grad_x(phi, grid)
            lhs = float(np.sum(g.ux * u.ux) + np.sum(g.uy * u.uy))
            rhs = -float(np.sum(phi * of.div_x(u, grid)))
            scale = np.linalg.norm(phi.ravel()) * np.linalg.norm(
                np.concatenate([u.ux.ravel(), u.uy.ravel()])
            )
            assert abs(lhs - rhs) <= 1e-12 * max(scale, 1.0)

    def test_laplacian_negative_semidefinite(self, rng):
        grid = of.GridSpec(8)
        for _ in range(20):
            phi = rng.normal(size=(8, 8))
            g = of.grad_x(phi, grid)
            quad = float(np.sum(phi * of.div_x(g, grid)))
            assert quad <= 1e-12


class TestSpectralBound:
    def test_closed_form(self):
        assert of.lambda_max_spatial_bound(of.GridSpec(2)) == 8.0
        assert of.lambda_max_spatial_bound(of.GridSpec(33)) == 8192.0

    @pytest.mark.parametrize("n", [4, 8, 16])
    def test_power_iteration_below_bound(self, n):
        grid = of.GridSpec(n)
        inv_dx = 1.0 / grid.dx

        def neg_laplacian(phi):
            return -_div_stack(_grad_stack(phi, inv_dx), inv_dx)

        lam = power_iteration_bound(neg_laplacian, (n, n), iters=500)
        assert lam <= of.lambda_max_spatial_bound(grid) * (1 + 1e-10)
        assert lam > 0.5 * of.lambda_max_spatial_bound(grid)  # bound is tight-ish
