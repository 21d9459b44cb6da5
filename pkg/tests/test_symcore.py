import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conegeo.errors import InvalidInput, NotPositiveDefinite
from conegeo.symcore import (SpdMatrix, eigh, logdet, random_spd, random_sym, solve_spd, sym,
                             sym_func)


class TestSym:
    def test_exactly_symmetric(self, rng):
        A = sym(rng.standard_normal((5, 5)))
        assert np.array_equal(A, A.T)

    @pytest.mark.parametrize("bad", [np.zeros((2, 3)), np.zeros((0, 0)),
                                     np.array([[1.0, np.nan], [0.0, 1.0]])])
    def test_rejects_malformed(self, bad):
        with pytest.raises(InvalidInput):
            sym(bad)


class TestEigh:
    def test_identity(self):
        np.testing.assert_array_equal(eigh(np.eye(3)).eigenvalues, [1, 1, 1])

    def test_diagonal(self):
        w, Q = eigh(np.diag([2.0, -1.0]))
        np.testing.assert_allclose(w, [-1, 2])
        np.testing.assert_allclose(np.abs(Q), [[0, 1], [1, 0]])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2**31))
    def test_reconstruction_and_orthogonality(self, d, seed):
        A = random_sym(np.random.default_rng(seed), d, scale=3.0)
        dec = eigh(A)
        tol = 1e-10 * (1 + np.linalg.norm(A))
        assert np.linalg.norm(dec.reconstruct() - A) <= tol
        Q = dec.eigenvectors
        assert np.linalg.norm(Q.T @ Q - np.eye(d)) <= 1e-10
        assert np.all(np.diff(dec.eigenvalues) >= 0)


class TestSymFunc:
    def test_exp_zero(self):
        np.testing.assert_allclose(sym_func(np.zeros((3, 3)), "exp"), np.eye(3))

    def test_log_scalar(self):
        np.testing.assert_allclose(sym_func(np.e * np.eye(2), "log"), np.eye(2), atol=1e-15)

    def test_sqrt_squares_back(self, rng):
        A = random_spd(rng, 5, cond=100.0)
        R = sym_func(A, "sqrt")
        np.testing.assert_allclose(R @ R, A, rtol=0, atol=1e-12 * np.linalg.norm(A))

    def test_invsqrt(self, rng):
        A = random_spd(rng, 4)
        R = sym_func(A, "invsqrt")
        np.testing.assert_allclose(R @ A @ R, np.eye(4), atol=1e-12)

    def test_exp_log_inverse(self, rng):
        S = random_sym(rng, 4)
        np.testing.assert_allclose(sym_func(sym_func(S, "exp"), "log"), S, atol=1e-12)

    def test_log_requires_pd(self):
        with pytest.raises(NotPositiveDefinite):
            sym_func(np.diag([1.0, -1e-3]), "log")

    def test_unknown_function(self):
        with pytest.raises(InvalidInput):
            sym_func(np.eye(2), "cos")


class TestLogdetSolve:
    def test_identity(self):
        assert logdet(np.eye(4)) == 0.0

    def test_diagonal(self):
        assert logdet(np.diag([2.0, 3.0])) == pytest.approx(np.log(6.0), rel=1e-15)

    def test_path_matrix(self):
        assert logdet(np.array([[2.0, -1.0], [-1.0, 2.0]])) == pytest.approx(np.log(3.0), rel=1e-14)

    def test_matches_slogdet(self, rng):
        A = random_spd(rng, 6, cond=1e4)
        assert logdet(A) == pytest.approx(np.linalg.slogdet(A)[1], rel=1e-12)

    def test_cached_logdet(self, rng):
        X = SpdMatrix(random_spd(rng, 5))
        assert X.logdet == pytest.approx(2 * np.sum(np.log(np.diag(X.chol))), rel=1e-12)
        assert logdet(X) == X.logdet

    def test_not_pd(self):
        with pytest.raises(NotPositiveDefinite):
            logdet(np.diag([1.0, 0.0]))
        with pytest.raises(NotPositiveDefinite):
            SpdMatrix(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_solve_trivial(self, rng):
        B = rng.standard_normal((3, 2))
        np.testing.assert_allclose(solve_spd(np.eye(3), B), B)
        np.testing.assert_allclose(solve_spd(2 * np.eye(3), np.eye(3)), 0.5 * np.eye(3))

    def test_solve_residual(self, rng):
        A = random_spd(rng, 6, cond=1e3)
        B = rng.standard_normal((6, 3))
        np.testing.assert_allclose(A @ solve_spd(A, B), B, atol=1e-10)

    def test_solve_shape_mismatch(self):
        with pytest.raises(InvalidInput):
            solve_spd(np.eye(3), np.ones(2))

    def test_array_is_read_only(self):
        X = SpdMatrix(np.eye(2))
        with pytest.raises(ValueError):
            X.array[0, 0] = 5.0
