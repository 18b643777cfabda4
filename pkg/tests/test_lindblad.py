import numpy as np
import pytest

import otflux as of
from otflux.errors import DimensionMismatchError, ValidationError

from conftest import random_hermitian, random_skew_stack


def diag3():
    return np.diag([1.0, 2.0, 0.0]).astype(complex)


def pair3():
    return of.default_lindblad3()


class TestGrad:
    def test_identity_commutes(self):
        L = pair3()
        assert np.allclose(of.grad_L(L, np.eye(3, dtype=complex)), 0)

    def test_commuting_matrix_gives_zero(self):
        # single-element set: the matrix itself commutes with itself
        mats = diag3()[None]
        out = of.grad_L(mats, diag3())
        assert np.allclose(out, 0)

    def test_offdiagonal_commutator(self):
        # [diag(1,2,0), E12+E21] has entry (1,2) = -1 and (2,1) = +1
        x = np.zeros((3, 3), dtype=complex)
        x[0, 1] = x[1, 0] = 1.0
        out = of.grad_L(diag3()[None], x)
        expected = np.zeros((3, 3), dtype=complex)
        expected[0, 1] = -1.0
        expected[1, 0] = 1.0
        assert np.allclose(out[0], expected)

    def test_output_exactly_skew(self, rng):
        L = pair3()
        for _ in range(20):
            z = of.grad_L(L, random_hermitian(rng, 3))
            assert np.array_equal(z, -np.conj(np.swapaxes(z, -1, -2)))

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            of.grad_L(pair3(), np.eye(2, dtype=complex))


class TestDiv:
    def test_zero(self):
        assert np.allclose(of.div_L(pair3(), np.zeros((2, 3, 3), dtype=complex)), 0)

    def test_trace_free(self, rng):
        L = pair3()
        for _ in range(50):
            z = random_skew_stack(rng, (2,), 3)
            d = of.div_L(L, z)
            assert abs(np.trace(d)) < 1e-12
            assert np.array_equal(d, np.conj(d.T))

    def test_adjointness_hundred_pairs(self, rng):
        L = pair3()
        for _ in range(100):
            x = random_hermitian(rng, 3)
            z = random_skew_stack(rng, (2,), 3)
            lhs = of.hs_inner(of.grad_L(L, x), z)
            rhs = -of.hs_inner(x, of.div_L(L, z))
            scale = max(1.0, np.linalg.norm(x) * np.linalg.norm(z))
            assert abs(lhs - rhs) <= 1e-12 * scale


class TestOperatorMatrix:
    def test_laplacian_psd(self):
        M = of.operator_matrix(pair3())
        assert np.allclose(M, M.T)
        assert np.linalg.eigvalsh(M).min() > -1e-12

    def test_lambda_max_identity_set_is_zero(self):
        # {I} commutes with everything; operator is identically zero
        assert of.lambda_max_L(np.eye(2, dtype=complex)[None]) == pytest.approx(0.0)

    def test_lambda_max_rank_one_projector(self):
        # L = diag(1, 0): the operator multiplies E_ij by (l_i - l_j)^2,
        # so the explicit 4x4 realization is diag(0, 0, 1, 1)
        mats = np.diag([1.0, 0.0]).astype(complex)[None]
        M = of.operator_matrix(mats)
        assert np.allclose(np.sort(np.linalg.eigvalsh(M)), [0, 0, 1, 1], atol=1e-12)
        assert of.lambda_max_L(mats) == pytest.approx(1.0, rel=1e-8)

    def test_lambda_max_quadratic_scaling(self):
        L = pair3()
        lam = of.lambda_max_L(L)
        lam_scaled = of.lambda_max_L(2.5 * L.matrices)
        assert lam_scaled == pytest.approx(2.5**2 * lam, rel=1e-10)

    def test_basis_orthonormal(self):
        B = of.hermitian_basis(3)
        G = np.real(np.einsum("apq,bpq->ab", B, np.conj(B)))
        assert np.allclose(G, np.eye(9), atol=1e-14)


class TestKernel:
    def test_reference_pair_accepted(self):
        assert of.check_kernel(pair3().matrices)

    def test_single_diagonal_rejected(self):
        # every diagonal matrix commutes with diag(1,2,0): kernel dim >= 3
        assert not of.check_kernel(diag3()[None])

    def test_identity_rejected(self):
        assert not of.check_kernel(np.eye(3, dtype=complex)[None])

    def test_construction_enforces_kernel(self):
        with pytest.raises(ValidationError):
            of.LindbladSet(diag3()[None])

    def test_non_hermitian_rejected(self):
        bad = np.array([[[0, 1], [0, 0]]], dtype=complex)
        with pytest.raises(ValidationError):
            of.LindbladSet(bad)


class TestJsonRoundtrip:
    def test_roundtrip(self, tmp_path):
        L = pair3()
        p = tmp_path / "L.json"
        of.save_lindblad(p, L)
        back = of.load_lindblad(p)
        assert back.k == 3 and back.ell == 2
        assert np.array_equal(back.matrices, L.matrices)

    def test_malformed(self, tmp_path):
        p = tmp_path / "L.json"
        p.write_text('{"k": 2, "ell": 1, "matrices": [[[1, 0]]]}')
        with pytest.raises(ValidationError):
            of.load_lindblad(p)
