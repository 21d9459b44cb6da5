"""Matrix-weighted graph Laplacians and the stabilized log-det energy.

A graph with ``m`` vertices carries a PSD ``d x d`` weight on each edge.  The
block Laplacian ``L(W) = sum_e (b_e b_eᵀ) ⊗ W_e`` is shifted by a fixed
``R ≻ 0`` to give ``X(W) = L(W) + R`` and the energy ``Phi(W) = -log det X(W)``.
Directional derivatives and the pullback metric are exact trace formulas.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidInput
from .symcore import SpdMatrix, sym

PSD_TOL = -1e-12
DEFAULT_REG = 0.1


@dataclass(frozen=True)
class OrientedGraph:
    """Undirected graph with a fixed edge orientation ``(tail, head)``."""

    num_vertices: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.num_vertices < 1:
            raise InvalidInput("graph needs at least one vertex")
        edges = tuple((int(t), int(h)) for t, h in self.edges)
        for t, h in edges:
            if not (0 <= t < self.num_vertices and 0 <= h < self.num_vertices):
                raise InvalidInput(f"edge ({t}, {h}) out of range for m={self.num_vertices}")
            if t == h:
                raise InvalidInput(f"self-loop at vertex {t}")
        object.__setattr__(self, "edges", edges)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def incidence(self) -> np.ndarray:
        """Oriented incidence matrix ``B`` (m x |E|), +1 at the tail, -1 at the head."""
        B = np.zeros((self.num_vertices, self.num_edges))
        for k, (t, h) in enumerate(self.edges):
            B[t, k] = 1.0
            B[h, k] = -1.0
        return B

    def flipped(self, which: Sequence[int] | None = None) -> "OrientedGraph":
        which = range(self.num_edges) if which is None else set(which)
        edges = [(h, t) if k in which else (t, h) for k, (t, h) in enumerate(self.edges)]
        return OrientedGraph(self.num_vertices, tuple(edges))

    def is_connected(self) -> bool:
        seen, stack = {0}, [0]
        adj: dict[int, list[int]] = {v: [] for v in range(self.num_vertices)}
        for t, h in self.edges:
            adj[t].append(h)
            adj[h].append(t)
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.num_vertices

    @classmethod
    def cycle(cls, m: int) -> "OrientedGraph":
        if m < 3:
            raise InvalidInput("a cycle needs m >= 3")
        return cls(m, tuple((i, (i + 1) % m) for i in range(m)))

    @classmethod
    def complete(cls, m: int) -> "OrientedGraph":
        return cls(m, tuple(itertools.combinations(range(m), 2)))

    @classmethod
    def path(cls, m: int) -> "OrientedGraph":
        return cls(m, tuple((i, i + 1) for i in range(m - 1)))


@dataclass(frozen=True)
class EdgeWeights:
    """One symmetric ``d x d`` block per edge.

    With ``check_psd`` (the default) every block must have smallest eigenvalue
    at least ``-1e-12``; perturbation directions may turn it off.
    """

    d: int
    per_edge: tuple[np.ndarray, ...]
    check_psd: bool = field(default=True, repr=False)

    def __post_init__(self):
        blocks = []
        for k, Wk in enumerate(self.per_edge):
            Wk = sym(Wk)
            if Wk.shape != (self.d, self.d):
                raise InvalidInput(f"edge block {k} has shape {Wk.shape}, expected d={self.d}")
            Wk.flags.writeable = False
            blocks.append(Wk)
        object.__setattr__(self, "per_edge", tuple(blocks))
        if self.check_psd and not self.is_psd():
            raise InvalidInput("edge weights must be PSD (smallest eigenvalue >= -1e-12)")

    def __len__(self) -> int:
        return len(self.per_edge)

    def is_psd(self) -> bool:
        return all(np.linalg.eigvalsh(Wk)[0] >= PSD_TOL for Wk in self.per_edge)

    @classmethod
    def zeros(cls, num_edges: int, d: int) -> "EdgeWeights":
        return cls(d, tuple(np.zeros((d, d)) for _ in range(num_edges)))

    def __add__(self, other: "EdgeWeights") -> "EdgeWeights":
        return self.axpy(1.0, other)

    def axpy(self, t: float, other: "EdgeWeights") -> "EdgeWeights":
        """``self + t * other``; PSD checking follows ``self``."""
        if len(other) != len(self) or other.d != self.d:
            raise InvalidInput("weight shapes differ")
        blocks = tuple(a + t * b for a, b in zip(self.per_edge, other.per_edge))
        return EdgeWeights(self.d, blocks, check_psd=self.check_psd and t >= 0)


class PerturbationDirection(EdgeWeights):
    """Per-edge symmetric blocks used as a direction; need not be PSD."""

    def __init__(self, d: int, per_edge, check_psd: bool = False):
        super().__init__(d, tuple(per_edge), check_psd=check_psd)

    @property
    def is_cone_direction(self) -> bool:
        return self.is_psd()


def random_psd_weights(rng: np.random.Generator, num_edges: int, d: int,
                       rank: int | None = None) -> EdgeWeights:
    """Wishart-like edge weights ``G Gᵀ / d`` with ``G`` of shape (d, rank)."""
    rank = d if rank is None else rank
    blocks = []
    for _ in range(num_edges):
        G = rng.standard_normal((d, rank))
        blocks.append(G @ G.T / d)
    return EdgeWeights(d, tuple(blocks))


def random_direction(rng: np.random.Generator, num_edges: int, d: int,
                     cone: bool = True) -> PerturbationDirection:
    blocks = []
    for _ in range(num_edges):
        G = rng.standard_normal((d, d))
        blocks.append(G @ G.T / d if cone else sym(G))
    return PerturbationDirection(d, blocks)


def _check_shapes(graph: OrientedGraph, W: EdgeWeights):
    if len(W) != graph.num_edges:
        raise InvalidInput(f"{len(W)} weight blocks for {graph.num_edges} edges")


def block_laplacian(graph: OrientedGraph, W: EdgeWeights) -> np.ndarray:
    """Dense ``L(W) = sum_e (b_e b_eᵀ) ⊗ W_e`` of size ``m*d``."""
    _check_shapes(graph, W)
    d = W.d
    L = np.zeros((graph.num_vertices * d,) * 2)
    for (t, h), We in zip(graph.edges, W.per_edge):
        it, ih = slice(t * d, (t + 1) * d), slice(h * d, (h + 1) * d)
        # b_e b_eᵀ has +1 on (t,t), (h,h) and -1 on (t,h), (h,t): sign-free in orientation
        L[it, it] += We
        L[ih, ih] += We
        L[it, ih] -= We
        L[ih, it] -= We
    return L


def block_laplacian_kron(graph: OrientedGraph, W: EdgeWeights) -> np.ndarray:
    """Reference construction ``(B ⊗ I)(⊕ W_e)(Bᵀ ⊗ I)`` used as a test oracle."""
    _check_shapes(graph, W)
    d = W.d
    BI = np.kron(graph.incidence(), np.eye(d))
    D = np.zeros((graph.num_edges * d,) * 2)
    for k, We in enumerate(W.per_edge):
        D[k * d:(k + 1) * d, k * d:(k + 1) * d] = We
    return BI @ D @ BI.T


def dirichlet_form(graph: OrientedGraph, W: EdgeWeights, x) -> float:
    """``sum_e (x_i - x_j)ᵀ W_e (x_i - x_j)``."""
    _check_shapes(graph, W)
    x = np.asarray(x, dtype=float)
    if x.shape != (graph.num_vertices * W.d,):
        raise InvalidInput(f"x must have length {graph.num_vertices * W.d}")
    xv = x.reshape(graph.num_vertices, W.d)
    total = 0.0
    for (t, h), We in zip(graph.edges, W.per_edge):
        diff = xv[t] - xv[h]
        total += diff @ We @ diff
    return float(total)


class ModelContext:
    """A graph, regularizer ``R`` and weight point ``W`` with ``X = L(W) + R`` factored.

    Immutable: :meth:`with_weights` returns a fresh context.
    """

    def __init__(self, graph: OrientedGraph, W: EdgeWeights, R=None):
        _check_shapes(graph, W)
        self.graph = graph
        self.W = W
        self.d = W.d
        n = graph.num_vertices * W.d
        if R is None:
            R = DEFAULT_REG * np.eye(n)
        self.R = R if isinstance(R, SpdMatrix) else SpdMatrix(R)
        if self.R.dim != n:
            raise InvalidInput(f"R must be {n}x{n}")
        self.X = SpdMatrix(block_laplacian(graph, W) + self.R.array)

    def with_weights(self, W: EdgeWeights) -> "ModelContext":
        return ModelContext(self.graph, W, self.R)

    def lift(self, U: EdgeWeights) -> np.ndarray:
        return block_laplacian(self.graph, U)

    def _whitened(self, U: EdgeWeights) -> np.ndarray:
        # X⁻¹ L(U)
        return self.X.solve(self.lift(U))


def energy_phi(ctx: ModelContext) -> float:
    """``-log det X(W)``."""
    return -ctx.X.logdet


def dir_deriv_phi(ctx: ModelContext, U: EdgeWeights) -> float:
    """``D_U Phi = -tr(X⁻¹ L(U))``."""
    return -float(np.trace(ctx._whitened(U)))


def pullback_metric(ctx: ModelContext, U: EdgeWeights, V: EdgeWeights) -> float:
    """``g_W(U, V) = tr(X⁻¹ L(U) X⁻¹ L(V))``."""
    A = ctx._whitened(U)
    B = A if V is U else ctx._whitened(V)
    # tr(AB) without forming the product
    return float(np.sum(A * B.T))


def rayleigh_residual(ctx: ModelContext, U: EdgeWeights, V: EdgeWeights) -> float:
    """``(D_U f)(D_V f) - f D_U D_V f - f² g_W(U, V)`` with ``f = det X``.

    Zero up to roundoff; every term scales like ``f²``, so callers compare the
    residual against ``f²``.  Uses the closed-form first and second
    derivatives of ``f``.
    """
    f = np.exp(-energy_phi(ctx))
    A = ctx._whitened(U)
    B = ctx._whitened(V)
    tU, tV = np.trace(A), np.trace(B)
    tUV = float(np.sum(A * B.T))
    DUf = f * tU
    DVf = f * tV
    DUDVf = f * (tU * tV - tUV)
    return float(DUf * DVf - f * DUDVf - f * f * tUV)


def rank_one_direction(graph: OrientedGraph, edge_index: int, u) -> PerturbationDirection:
    """Direction with ``u uᵀ`` on one edge and zeros elsewhere."""
    u = np.asarray(u, dtype=float).ravel()
    if not 0 <= edge_index < graph.num_edges:
        raise InvalidInput(f"edge index {edge_index} out of range")
    if not np.any(u) or not np.all(np.isfinite(u)):
        raise InvalidInput("u must be a finite nonzero vector")
    d = u.size
    blocks = [np.zeros((d, d)) for _ in range(graph.num_edges)]
    blocks[edge_index] = np.outer(u, u)
    return PerturbationDirection(d, blocks)


def matrix_tree_check(graph: OrientedGraph) -> int:
    """Spanning-tree count from the reduced scalar Laplacian determinant."""
    if not graph.is_connected():
        raise InvalidInput("graph is disconnected")
    if graph.num_vertices == 1:
        return 1
    W = EdgeWeights(1, tuple(np.ones((1, 1)) for _ in graph.edges))
    L = block_laplacian(graph, W)
    return int(round(np.linalg.det(L[1:, 1:])))


def load_edge_list(path) -> tuple[OrientedGraph, EdgeWeights]:
    """Read ``m d`` then one ``tail head w_11 w_12 ... w_dd`` line per edge.

    Weight entries are the upper triangle, row-major.  Blank lines and ``#``
    comments are skipped.
    """
    lines = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise InvalidInput(f"{path}: empty edge-list file")
    try:
        m, d = (int(tok) for tok in lines[0].split())
    except ValueError:
        raise InvalidInput(f"{path}: header must be 'm d'") from None
    iu = np.triu_indices(d)
    edges, blocks = [], []
    for lineno, ln in enumerate(lines[1:], start=2):
        tok = ln.split()
        if len(tok) != 2 + len(iu[0]):
            raise InvalidInput(f"{path}:{lineno}: expected {2 + len(iu[0])} fields, got {len(tok)}")
        edges.append((int(tok[0]), int(tok[1])))
        Wk = np.zeros((d, d))
        Wk[iu] = [float(v) for v in tok[2:]]
        blocks.append(Wk + np.triu(Wk, 1).T)
    return OrientedGraph(m, tuple(edges)), EdgeWeights(d, tuple(blocks))


def save_edge_list(path, graph: OrientedGraph, W: EdgeWeights) -> None:
    iu = np.triu_indices(W.d)
    out = [f"{graph.num_vertices} {W.d}"]
    for (t, h), Wk in zip(graph.edges, W.per_edge):
        out.append(" ".join([str(t), str(h)] + [repr(float(v)) for v in Wk[iu]]))
    Path(path).write_text("\n".join(out) + "\n")
