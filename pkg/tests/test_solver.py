import numpy as np
import pytest

import otflux as of
from otflux.errors import UnsupportedNormError, ValidationError


def finite_residuals(report):
    return [h.residual for h in report.history if np.isfinite(h.residual)]


def assert_healthy(report, cfg):
    res = finite_residuals(report)
    assert all(r >= -1e-9 * max(res[0], 1.0) for r in res)
    for a, b in zip(res, res[1:]):
        assert b <= a * (1 + 1e-9) + 1e-15
    assert report.converged
    last = report.history[-1]
    assert last.gap_ratio <= cfg.tol_gap
    assert last.feas_residual <= cfg.tol_feas


class TestStepSizes:
    def test_scalar_values(self):
        mu, tau = of.step_sizes_scalar(of.GridSpec(33), 1.0)
        assert mu == pytest.approx(1 / 16384)
        mu, _ = of.step_sizes_scalar(of.GridSpec(2), 2.0)
        assert mu == pytest.approx(1 / 32)

    def test_scalar_product_half(self):
        for tau in (0.3, 1.0, 7.0):
            grid = of.GridSpec(17)
            mu, _ = of.step_sizes_scalar(grid, tau)
            assert tau * mu * of.lambda_max_spatial_bound(grid) == pytest.approx(0.5)

    def test_vector_values(self):
        g = of.TransportGraph(2, [(0, 1)], [1.0])
        mu, nu, tau = of.step_sizes_vector(of.GridSpec(33), g, 1.0)
        assert mu == pytest.approx(1 / 32768)
        assert nu == pytest.approx(1 / 8)

    def test_vector_combined_bound_half(self):
        g = of.triangle_graph((1.0, 2.0, 0.7))
        grid = of.GridSpec(9)
        for tau in (0.5, 1.0, 4.0):
            mu, nu, _ = of.step_sizes_vector(grid, g, tau)
            total = tau * mu * of.lambda_max_spatial_bound(grid) \
                + tau * nu * of.lambda_max_graph(g)
            assert total == pytest.approx(0.5)

    def test_matrix_uses_operator_bound(self):
        L = of.default_lindblad3()
        grid = of.GridSpec(9)
        mu, nu, tau = of.step_sizes_matrix(grid, L, 2.0)
        assert nu == pytest.approx(1 / (4 * 2.0 * of.lambda_max_L(L)))

    def test_rejects_bad_tau(self):
        with pytest.raises(ValidationError):
            of.step_sizes_scalar(of.GridSpec(4), 0.0)


class TestScalarSolve:
    def test_identical_marginals_immediate(self, rng):
        d = of.normalize(of.ScalarDensity(rng.random((8, 8))))
        report, state = of.solve_scalar(d, d)
        assert report.converged
        assert report.iterations == 0
        assert report.transport_value == pytest.approx(0.0, abs=1e-12)

    def test_dirac_pair_distance(self):
        grid = of.GridSpec(33)
        a, b = of.dirac_pair(grid, (8, 16), (24, 16))
        cfg = of.SolverConfig(tau=3.0)
        report, state = of.solve_scalar(a, b, cfg=cfg)
        assert report.converged
        assert report.transport_value == pytest.approx(0.5, rel=0.02)
        assert_healthy(report, cfg)

    def test_mass_mismatch_rejected(self, rng):
        a = of.normalize(of.ScalarDensity(rng.random((6, 6))))
        b = of.ScalarDensity(a.values * 1.5)
        with pytest.raises(ValidationError):
            of.solve_scalar(a, b)

    def test_ghost_stays_zero(self, rng):
        a = of.normalize(of.ScalarDensity(rng.random((7, 7))))
        b = of.normalize(of.ScalarDensity(rng.random((7, 7))))
        _, state = of.solve_scalar(a, b, cfg=of.SolverConfig(max_iters=500))
        assert np.all(state.u.ux[-1, :] == 0)
        assert np.all(state.u.uy[:, -1] == 0)

    def test_deterministic(self, rng):
        a = of.normalize(of.ScalarDensity(rng.random((6, 6))))
        b = of.normalize(of.ScalarDensity(rng.random((6, 6))))
        r1, s1 = of.solve_scalar(a, b)
        r2, s2 = of.solve_scalar(a, b)
        assert r1.transport_value == r2.transport_value
        assert r1.iterations == r2.iterations
        assert np.array_equal(s1.phi, s2.phi)
        assert np.array_equal(s1.u.ux, s2.u.ux)

    def test_nonconvergence_reported(self, rng):
        a = of.normalize(of.ScalarDensity(rng.random((8, 8))))
        b = of.normalize(of.ScalarDensity(rng.random((8, 8))))
        report, _ = of.solve_scalar(a, b, cfg=of.SolverConfig(max_iters=5))
        assert not report.converged
        assert report.iterations == 5

    def test_thread_count_invariance(self, rng):
        # kernels are reduction-free whole-array ops: the BLAS pool size
        # must not change a single bit of the result
        from threadpoolctl import threadpool_limits

        a = of.normalize(of.VectorDensity(rng.random((10, 10, 3))))
        b = of.normalize(of.VectorDensity(rng.random((10, 10, 3))))
        g = of.triangle_graph()
        cfg = of.SolverConfig(tau=3.0, max_iters=400)
        with threadpool_limits(limits=1):
            r1, s1 = of.solve_vector(a, b, g, cfg=cfg)
        with threadpool_limits(limits=4):
            r2, s2 = of.solve_vector(a, b, g, cfg=cfg)
        assert r1.transport_value == r2.transport_value
        assert np.array_equal(s1.phi, s2.phi)
        assert np.array_equal(s1.u.ux, s2.u.ux)
        assert np.array_equal(s1.w.values, s2.w.values)


class TestVectorSolve:
    def test_identical_marginals(self, rng):
        vals = rng.random((6, 6, 3))
        d = of.normalize(of.VectorDensity(vals))
        report, _ = of.solve_vector(d, d, of.triangle_graph())
        assert report.converged and report.transport_value == pytest.approx(0.0, abs=1e-12)

    def test_single_pixel_channel_swap_costs_alpha_c(self):
        # all mass changes channel R -> G at one pixel: V = alpha * c_1
        grid = of.GridSpec(4)
        v0 = np.zeros((4, 4, 3))
        v0[1, 1, 0] = 1.0
        v1 = np.zeros((4, 4, 3))
        v1[1, 1, 1] = 1.0
        cfg = of.SolverConfig(norm_u="l1", norm_w="l1")
        report, _ = of.solve_vector(
            of.VectorDensity(v0), of.VectorDensity(v1), of.triangle_graph(), cfg=cfg
        )
        assert report.converged
        assert report.transport_value == pytest.approx(1.0, rel=0.02)
        lp = of.lp_oracle(of.VectorDensity(v0), of.VectorDensity(v1),
                          graph=of.triangle_graph())
        assert report.transport_value == pytest.approx(lp, rel=0.01)

    def test_graph_channel_mismatch(self, rng):
        d = of.normalize(of.VectorDensity(rng.random((5, 5, 2))))
        with pytest.raises(ValidationError):
            of.solve_vector(d, d, of.triangle_graph())

    def test_orientation_flip_invariance(self, rng):
        g1 = of.triangle_graph()
        g2 = of.TransportGraph(3, g1.edges, g1.costs, orientations=[-1, -1, -1])
        a = of.normalize(of.VectorDensity(rng.random((6, 6, 3))))
        b = of.normalize(of.VectorDensity(rng.random((6, 6, 3))))
        cfg = of.SolverConfig(tau=3.0)
        r1, _ = of.solve_vector(a, b, g1, cfg=cfg)
        r2, _ = of.solve_vector(a, b, g2, cfg=cfg)
        assert r1.transport_value == pytest.approx(r2.transport_value, rel=2 * cfg.tol_gap)

    def test_healthy_run(self, rng):
        a = of.normalize(of.VectorDensity(rng.random((8, 8, 3))))
        b = of.normalize(of.VectorDensity(rng.random((8, 8, 3))))
        cfg = of.SolverConfig(tau=3.0)
        report, state = of.solve_vector(a, b, of.triangle_graph(), cfg=cfg)
        assert_healthy(report, cfg)
        assert state.w.values.shape == (8, 8, 3)


class TestMatrixSolve:
    def test_identical_marginals(self, rng):
        grid = of.GridSpec(5)
        m0, _, _ = of.matrix_blob_fixtures(grid)
        report, _ = of.solve_matrix(m0, m0, of.default_lindblad3())
        assert report.converged and report.transport_value == pytest.approx(0.0, abs=1e-12)

    def test_kernel_violation_rejected_at_set_construction(self):
        with pytest.raises(ValidationError):
            of.LindbladSet(np.diag([1.0, 2.0, 0.0]).astype(complex)[None])

    def test_dim_mismatch(self, rng):
        vals = np.zeros((4, 4, 2, 2), dtype=complex)
        vals[0, 0] = np.eye(2)
        d = of.normalize(of.MatrixDensity(vals))
        with pytest.raises(ValidationError):
            of.solve_matrix(d, d, of.default_lindblad3())

    def test_colocated_pair_converges_and_stays_structured(self):
        grid = of.GridSpec(8)
        m0, m1, _ = of.matrix_blob_fixtures(grid)
        cfg = of.SolverConfig(tau=10.0, norm_u="l2", norm_w="l1")
        report, state = of.solve_matrix(m0, m1, of.default_lindblad3(), cfg=cfg)
        assert_healthy(report, cfg)
        phi = state.phi
        assert np.array_equal(phi, np.conj(np.swapaxes(phi, -1, -2)))
        wv = state.w.values
        assert np.array_equal(wv, -np.conj(np.swapaxes(wv, -1, -2)))
        ux = state.u.ux
        assert np.array_equal(ux, np.conj(np.swapaxes(ux, -1, -2)))


class TestResidual:
    def test_zero_for_identical_states(self, rng):
        a = of.normalize(of.ScalarDensity(rng.random((6, 6))))
        b = of.normalize(of.ScalarDensity(rng.random((6, 6))))
        _, state = of.solve_scalar(a, b, cfg=of.SolverConfig(max_iters=50))
        mu, tau = of.step_sizes_scalar(of.GridSpec(6), 1.0)
        assert of.residual_Rk(state, state, mu, None, tau) == pytest.approx(0.0, abs=1e-12)

    def test_nonnegative_under_step_condition(self, rng):
        # R is a quadratic form that is PSD exactly when the step bound holds
        grid = of.GridSpec(6)
        g = of.triangle_graph()
        mu, nu, tau = of.step_sizes_vector(grid, g, 1.0)
        a = of.normalize(of.VectorDensity(rng.random((6, 6, 3))))
        b = of.normalize(of.VectorDensity(rng.random((6, 6, 3))))
        states = []
        for iters in (40, 41):
            _, st = of.solve_vector(a, b, g, cfg=of.SolverConfig(max_iters=iters,
                                                                 check_every=1000))
            states.append(st)
        r = of.residual_Rk(states[0], states[1], mu, nu, tau, grid=grid, graph=g)
        assert r >= 0


class TestDualityGap:
    def test_zero_potential_gives_unit_gap(self, rng):
        a = of.normalize(of.ScalarDensity(rng.random((6, 6))))
        b = of.normalize(of.ScalarDensity(rng.random((6, 6))))
        report, state = of.solve_scalar(a, b, cfg=of.SolverConfig(max_iters=200))
        zeroed = of.SolverState(
            u=state.u, w=None, phi=np.zeros_like(state.phi), iteration=0,
            residual=0.0, primal_value=0.0, dual_value=0.0, gap_ratio=0.0,
            feas_residual=0.0,
        )
        primal, dual, gap, feas = of.duality_gap(zeroed, a, b, of.SolverConfig())
        assert dual == 0.0
        assert gap == pytest.approx(1.0)

    def test_weak_duality_along_run(self, rng):
        a = of.normalize(of.ScalarDensity(rng.random((8, 8))))
        b = of.normalize(of.ScalarDensity(rng.random((8, 8))))
        cfg = of.SolverConfig(tau=3.0)
        report, _ = of.solve_scalar(a, b, cfg=cfg)
        for h in report.history:
            if h.feas_residual <= cfg.tol_feas:
                assert h.dual <= h.primal * (1 + 10 * cfg.tol_feas) + 1e-12

    def test_dual_scaling_makes_certificate(self, rng):
        # the rescaled dual never exceeds the LP optimum
        a = of.normalize(of.ScalarDensity(rng.random((6, 6))))
        b = of.normalize(of.ScalarDensity(rng.random((6, 6))))
        cfg = of.SolverConfig(norm_u="l1")
        report, state = of.solve_scalar(a, b, cfg=cfg)
        opt = of.lp_oracle(a, b)
        assert state.dual_value <= opt * (1 + 1e-6)


class TestRegularized:
    def test_value_decreases_to_unregularized(self, rng):
        a = of.normalize(of.ScalarDensity(rng.random((8, 8))))
        b = of.normalize(of.ScalarDensity(rng.random((8, 8))))
        base_cfg = of.SolverConfig(tau=3.0)
        base, _ = of.solve_scalar(a, b, cfg=base_cfg)
        values = []
        for eps in (1e-1, 1e-2, 1e-3):
            cfg = of.SolverConfig(tau=3.0, eps_reg=eps)
            rep, _ = of.solve_scalar(a, b, cfg=cfg)
            assert rep.converged
            values.append(rep.transport_value)
            assert rep.transport_value >= base.transport_value - base_cfg.tol_gap
        # monotone approach from above as eps shrinks
        assert values[0] >= values[1] - 1e-6
        assert values[1] >= values[2] - 1e-6
        assert values[2] == pytest.approx(base.transport_value, rel=0.02)

    def test_nuclear_with_eps_rejected(self, rng):
        grid = of.GridSpec(5)
        m0, m1, _ = of.matrix_blob_fixtures(grid)
        cfg = of.SolverConfig(eps_reg=0.1, norm_u="l1nuc", norm_w="l1")
        with pytest.raises(UnsupportedNormError):
            of.solve_matrix(m0, m1, of.default_lindblad3(), cfg=cfg)


class TestConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValidationError):
            of.SolverConfig(tau=-1.0)
        with pytest.raises(ValidationError):
            of.SolverConfig(tol_gap=0.0)
        with pytest.raises(ValidationError):
            of.SolverConfig(alpha=0.0)
        with pytest.raises(ValidationError):
            of.SolverConfig(eps_reg=-0.5)

    def test_norms_coerced_to_enum(self):
        cfg = of.SolverConfig(norm_u="l12", norm_w="l1")
        assert cfg.norm_u is of.NormFamily.L12
