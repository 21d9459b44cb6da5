"""Dense symmetric / SPD linear algebra primitives.

Every routine returns exactly symmetric arrays: products are followed by
``(A + A.T) / 2`` so that downstream Cholesky factorizations see symmetric
input.  Matrices are plain ``numpy.ndarray`` objects; :class:`SpdMatrix`
adds a cached Cholesky factor for repeated solves.
"""
from __future__ import annotations

from typing import Callable, NamedTuple, Union

import numpy as np
import scipy.linalg

from .errors import InvalidInput, NotPositiveDefinite

ArrayLike = Union[np.ndarray, "SpdMatrix"]


def sym(A) -> np.ndarray:
    """Return the symmetric part ``(A + A.T) / 2`` as a float array."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise InvalidInput(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput("matrix has non-finite entries")
    return 0.5 * (A + A.T)


def _as_array(A) -> np.ndarray:
    return A.array if isinstance(A, SpdMatrix) else np.asarray(A, dtype=float)


def cholesky(A) -> np.ndarray:
    """Lower Cholesky factor; raises :class:`NotPositiveDefinite` on failure."""
    try:
        return np.linalg.cholesky(_as_array(A))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None


class SpdMatrix:
    """Symmetric positive definite matrix with a cached Cholesky factor.

    Construction fails with :class:`NotPositiveDefinite` when the Cholesky
    factorization fails; no silent regularization is applied.
    """

    __slots__ = ("array", "chol", "_logdet", "_inv")

    def __init__(self, A, *, chol: np.ndarray | None = None):
        if isinstance(A, SpdMatrix):
            A = A.array
        self.array = sym(A)
        self.array.flags.writeable = False
        self.chol = cholesky(self.array) if chol is None else chol
        self._logdet: float | None = None
        self._inv: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.array.shape[0]

    @property
    def logdet(self) -> float:
        if self._logdet is None:
            self._logdet = float(2.0 * np.sum(np.log(np.diag(self.chol))))
        return self._logdet

    def solve(self, B) -> np.ndarray:
        return scipy.linalg.cho_solve((self.chol, True), np.asarray(B, dtype=float))

    def inv(self) -> np.ndarray:
        if self._inv is None:
            self._inv = sym(self.solve(np.eye(self.dim)))
            self._inv.flags.writeable = False
        return self._inv

    def __repr__(self) -> str:
        return f"SpdMatrix(dim={self.dim}, logdet={self.logdet:.6g})"


class EigenDecomp(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        Q, w = self.eigenvectors, self.eigenvalues
        return sym((Q * w) @ Q.T)


def eigh(A) -> EigenDecomp:
    """Symmetric eigendecomposition with eigenvalues in ascending order."""
    w, Q = np.linalg.eigh(sym(_as_array(A)))
    return EigenDecomp(w, Q)


def _invsqrt(w):
    return 1.0 / np.sqrt(w)


_FUNCS: dict[str, tuple[Callable[[np.ndarray], np.ndarray], bool]] = {
    # name -> (scalar function, requires positive definite input)
    "exp": (np.exp, False),
    "log": (np.log, True),
    "sqrt": (np.sqrt, True),
    "invsqrt": (_invsqrt, True),
}


def sym_func(A, f: str) -> np.ndarray:
    """Apply ``f`` in {"exp", "log", "sqrt", "invsqrt"} spectrally: ``Q f(Λ) Qᵀ``."""
    try:
        fn, needs_pd = _FUNCS[f]
    except KeyError:
        raise InvalidInput(f"unknown matrix function {f!r}") from None
    w, Q = eigh(A)
    if needs_pd:
        # Cholesky is the PD test; eigenvalues alone can hide a tiny negative.
        cholesky(sym(_as_array(A)))
        if w[0] <= 0.0:
            raise NotPositiveDefinite(f"smallest eigenvalue {w[0]:.3e} <= 0")
    return sym((Q * fn(w)) @ Q.T)


def logdet(A: ArrayLike) -> float:
    """``log det A`` from the Cholesky diagonal."""
    if isinstance(A, SpdMatrix):
        return A.logdet
    L = cholesky(sym(A))
    return float(2.0 * np.sum(np.log(np.diag(L))))


def solve_spd(A: ArrayLike, B) -> np.ndarray:
    """Solve ``A X = B`` for SPD ``A`` via Cholesky."""
    A = A if isinstance(A, SpdMatrix) else SpdMatrix(A)
    B = np.asarray(B, dtype=float)
    if B.shape[0] != A.dim:
        raise InvalidInput(f"shape mismatch: A is {A.dim}x{A.dim}, B has {B.shape[0]} rows")
    return A.solve(B)


def random_spd(rng: np.random.Generator, d: int, cond: float = 10.0) -> np.ndarray:
    """Random SPD matrix with eigenvalues log-uniform in ``[1, cond]``."""
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    w = np.exp(rng.uniform(0.0, np.log(cond), size=d))
    return sym((Q * w) @ Q.T)


def random_sym(rng: np.random.Generator, d: int, scale: float = 1.0) -> np.ndarray:
    return sym(scale * rng.standard_normal((d, d)))
