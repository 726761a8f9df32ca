"""Recursive H-arithmetic vs dense numpy/scipy oracles."""

import numpy as np
import pytest
import scipy.linalg as sla

from conftest import factor_workspace, one_d_case

from hmatdag import arith
from hmatdag.arith import SingularPivotError, dense_lu, hlu, hmul, htrsl, htrsu
from hmatdag.hmatrix import EXACT, TruncationPolicy, assemble, rel_error, zeros
from hmatdag.problems import dense_matrix


class IdentityKernel:
    def dense(self, I, J):
        return (np.asarray(I)[:, None] == np.asarray(J)[None, :]).astype(float)


class TestHmul:
    def test_alpha_zero_bitwise(self):
        block, kernel = one_d_case(64)
        A = assemble(block, kernel, EXACT)
        C = assemble(block, kernel, EXACT)
        before = C.to_dense()
        hmul(0.0, A, A, C, EXACT)
        assert np.array_equal(C.to_dense(), before)

    def test_single_level_dense_gemm(self):
        block, kernel = one_d_case(16, n_min=16)
        A = assemble(block, kernel, EXACT)
        B = assemble(block, kernel, EXACT)
        C = assemble(block, kernel, EXACT)
        want = C.to_dense() + 2.0 * A.to_dense() @ B.to_dense()
        hmul(2.0, A, B, C, EXACT)
        assert rel_error(want, C.to_dense()) <= 1e-13

    def test_structured_vs_dense_oracle(self):
        n = 256
        block, kernel = one_d_case(n)
        A = assemble(block, kernel, EXACT)
        B = assemble(block, kernel, EXACT)
        C = assemble(block, kernel, EXACT)
        K = dense_matrix(kernel, n)
        want = K + 1.5 * K @ K
        hmul(1.5, A, B, C, EXACT)
        assert rel_error(want, C.to_dense()) <= 1e-12

    def test_add_then_subtract_restores(self):
        n = 128
        block, kernel = one_d_case(n)
        A = assemble(block, kernel, EXACT)
        B = assemble(block, kernel, EXACT)
        C = assemble(block, kernel, EXACT)
        start = C.to_dense()
        hmul(0.75, A, B, C, EXACT)
        hmul(-0.75, A, B, C, EXACT)
        assert rel_error(start, C.to_dense()) <= 1e-12

    def test_non_conformal_error(self):
        b1, k1 = one_d_case(32)
        b2, k2 = one_d_case(64)
        A = assemble(b1, k1, EXACT)
        B = assemble(b2, k2, EXACT)
        with pytest.raises(ValueError):
            hmul(1.0, A, B, assemble(b1, k1, EXACT), EXACT)


class TestDenseLU:
    def test_hand_computed(self):
        L, U = dense_lu(np.array([[4.0, 3.0], [6.0, 3.0]]))
        assert np.allclose(L, [[1.0, 0.0], [1.5, 1.0]])
        assert np.allclose(U, [[4.0, 3.0], [0.0, -1.5]])

    def test_singular_pivot(self):
        with pytest.raises(SingularPivotError):
            dense_lu(np.zeros((2, 2)))


class TestHlu:
    def test_identity(self):
        block, _ = one_d_case(64)
        A = assemble(block, IdentityKernel(), EXACT)
        L, U = zeros(block), zeros(block)
        hlu(A, L, U, EXACT)
        assert np.allclose(L.to_dense(), np.eye(64), atol=1e-14)
        assert np.allclose(U.to_dense(), np.eye(64), atol=1e-14)

    def test_residual_exact_512(self):
        n = 512
        block, kernel = one_d_case(n)
        A, L, U = factor_workspace(block, kernel)
        K = dense_matrix(kernel, n)
        hlu(A, L, U, EXACT)
        assert rel_error(K, L.to_dense() @ U.to_dense()) <= 1e-10

    def test_triangularity(self):
        n = 256
        block, kernel = one_d_case(n)
        A, L, U = factor_workspace(block, kernel)
        hlu(A, L, U, EXACT)
        Ld, Ud = L.to_dense(), U.to_dense()
        iu = np.triu_indices(n, 1)
        il = np.tril_indices(n, -1)
        assert np.allclose(Ld[iu], 0.0)
        assert np.allclose(np.diag(Ld), 1.0)
        assert np.allclose(Ud[il], 0.0)

    def test_truncated_residual(self):
        n = 512
        eps = 1e-6
        pol = TruncationPolicy.fixed_accuracy(eps)
        block, kernel = one_d_case(n)
        A, L, U = factor_workspace(block, kernel, pol)
        K = dense_matrix(kernel, n)
        hlu(A, L, U, pol)
        assert rel_error(K, L.to_dense() @ U.to_dense()) <= 100 * eps


class TestSolves:
    def factors(self, n):
        block, kernel = one_d_case(n)
        A, L, U = factor_workspace(block, kernel)
        hlu(A, L, U, EXACT)
        return block, kernel, L, U

    def test_identity_solves(self):
        block, kernel = one_d_case(64)
        I = assemble(block, IdentityKernel(), EXACT)
        M = assemble(block, kernel, EXACT)
        want = M.to_dense()
        X = zeros(block)
        htrsl(I, M, X, EXACT)
        assert rel_error(want, X.to_dense()) <= 1e-13
        M2 = assemble(block, kernel, EXACT)
        Y = zeros(block)
        htrsu(I, M2, Y, EXACT)
        assert rel_error(want, Y.to_dense()) <= 1e-13

    def test_dense_2x2_forward(self):
        block, _ = one_d_case(2, n_min=2)
        L = assemble(block, IdentityKernel(), EXACT)
        L.D = np.array([[1.0, 0.0], [2.0, 1.0]])
        M = assemble(block, IdentityKernel(), EXACT)
        M.D = np.array([[1.0, 2.0], [3.0, 4.0]])
        X = zeros(block)
        htrsl(L, M, X, EXACT)
        # forward substitution by hand: x0 = m0; x1 = m1 - 2*x0
        assert np.allclose(X.to_dense(), [[1.0, 2.0], [1.0, 0.0]])

    def test_htrsl_residual_512(self):
        n = 512
        block, kernel, L, U = self.factors(n)
        M = assemble(block, kernel, EXACT)
        want = M.to_dense()
        X = zeros(block)
        htrsl(L, M, X, EXACT)
        assert rel_error(want, L.to_dense() @ X.to_dense()) <= 1e-11

    def test_htrsu_residual_512(self):
        n = 512
        block, kernel, L, U = self.factors(n)
        M = assemble(block, kernel, EXACT)
        want = M.to_dense()
        X = zeros(block)
        htrsu(U, M, X, EXACT)
        assert rel_error(want, X.to_dense() @ U.to_dense()) <= 1e-11
