"""Affine-invariant Riemannian geometry on the SPD cone.

Tangent vectors at ``X`` are handled in congruence-transformed coordinates
``S = X^{-1/2} U X^{-1/2}``, in which the metric ``tr(X⁻¹ U X⁻¹ V)`` becomes
the Frobenius inner product and ``Exp_X`` becomes ``X^{1/2} exp(S) X^{1/2}``.

Lebesgue measure on symmetric matrices is fixed by :func:`to_coords`
(diagonal entries as-is, off-diagonal entries scaled by sqrt(2)).
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidInput, StepTooLarge
from .symcore import SpdMatrix, cholesky, eigh, sym, sym_func

MAX_STEP_NORM = 50.0
GAP_EPS = 1e-8


def _arr(X) -> np.ndarray:
    return X.array if isinstance(X, SpdMatrix) else np.asarray(X, dtype=float)


def sqrt_and_invsqrt(X) -> tuple[np.ndarray, np.ndarray]:
    """``(X^{1/2}, X^{-1/2})`` from a single eigendecomposition."""
    A = sym(_arr(X))
    if not isinstance(X, SpdMatrix):
        cholesky(A)
    w, Q = np.linalg.eigh(A)
    r = np.sqrt(w)
    return sym((Q * r) @ Q.T), sym((Q / r) @ Q.T)


def congruence(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``A B Aᵀ`` symmetrized."""
    return sym(A @ B @ A.T)


def ai_inner(X, U, V) -> float:
    """``tr(X⁻¹ U X⁻¹ V)``."""
    Xs = X if isinstance(X, SpdMatrix) else SpdMatrix(X)
    A = Xs.solve(sym(U))
    B = A if V is U else Xs.solve(sym(V))
    return float(np.sum(A * B.T))


def to_tangent_coords(X, U) -> np.ndarray:
    """``S = X^{-1/2} U X^{-1/2}``."""
    _, Xmh = sqrt_and_invsqrt(X)
    return congruence(Xmh, sym(U))


def from_tangent_coords(X, S) -> np.ndarray:
    """``U = X^{1/2} S X^{1/2}``."""
    Xh, _ = sqrt_and_invsqrt(X)
    return congruence(Xh, sym(S))


def exp_map(X, S) -> np.ndarray:
    """``Exp_X`` applied to the tangent vector with coordinates ``S``."""
    S = sym(S)
    if np.linalg.norm(S) > MAX_STEP_NORM:
        raise StepTooLarge(f"|S|_F = {np.linalg.norm(S):.3g} exceeds {MAX_STEP_NORM}")
    Xh, _ = sqrt_and_invsqrt(X)
    return congruence(Xh, sym_func(S, "exp"))


def log_map(X, Y) -> np.ndarray:
    """Coordinates ``S = log(X^{-1/2} Y X^{-1/2})`` of ``Log_X(Y)``."""
    _, Xmh = sqrt_and_invsqrt(X)
    return sym_func(congruence(Xmh, sym(_arr(Y))), "log")


def ai_distance(X, Y) -> float:
    """``|log(X^{-1/2} Y X^{-1/2})|_F``."""
    _, Xmh = sqrt_and_invsqrt(X)
    w = np.linalg.eigvalsh(congruence(Xmh, sym(_arr(Y))))
    return float(np.sqrt(np.sum(np.log(w) ** 2)))


def log_sinhc(x):
    """``log(sinh(x) / x)``, even in ``x``.

    Taylor series below ``0.1`` (so gaps under ``GAP_EPS`` never divide by zero), direct
    evaluation in the middle and an overflow-free form for large ``x``.
    """
    x = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    small = x < 0.1
    big = x > 20.0
    mid = ~(small | big)
    z = x[small] ** 2
    out[small] = z * (1 / 6 + z * (-1 / 180 + z * (1 / 2835 + z * (-1 / 37800 + z / 467775))))
    out[mid] = np.log(np.sinh(x[mid]) / x[mid])
    xl = x[big]
    # log(sinh x) = x + log(1 - e^{-2x}) - log 2
    out[big] = xl + np.log1p(-np.exp(-2.0 * xl)) - np.log(2.0) - np.log(xl)
    return out


def exp_jacobian_log_from_eigs(s: np.ndarray) -> float:
    i, j = np.triu_indices(s.size, 1)
    return float(np.sum(log_sinhc(0.5 * (s[i] - s[j]))))


def exp_jacobian_log(S) -> float:
    """Log-density of ``Exp_X`` from Lebesgue ``dS`` to Riemannian volume.

    ``log j(S) = sum_{i<j} log(sinh(g_ij) / g_ij)`` with ``g_ij`` half the
    eigenvalue gaps of ``S``; it is independent of the base point.
    """
    return exp_jacobian_log_from_eigs(eigh(S).eigenvalues)


def coord_dim(d: int) -> int:
    return d * (d + 1) // 2


def to_coords(A) -> np.ndarray:
    """Orthonormal vectorization: diagonal first, then sqrt(2)·A[i, j] for i < j."""
    A = sym(A)
    d = A.shape[0]
    i, j = np.triu_indices(d, 1)
    return np.concatenate([np.diag(A), np.sqrt(2.0) * A[i, j]])


def from_coords(v, d: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    if d is None:
        d = int(round((np.sqrt(8 * v.size + 1) - 1) / 2))
    if v.size != coord_dim(d):
        raise InvalidInput(f"coordinate vector of length {v.size} does not match d={d}")
    A = np.diag(v[:d])
    i, j = np.triu_indices(d, 1)
    off = v[d:] / np.sqrt(2.0)
    A[i, j] = off
    A[j, i] = off
    return A
