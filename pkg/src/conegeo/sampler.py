"""Metropolis-adjusted Langevin sampling on the SPD cone.

Target: ``pi(dX) ∝ exp(-Phi(X)) vol_g(dX)`` for the affine-invariant metric,
with

    Phi(X) = lam/2 * d_AI(X, X0)² - beta * log det X + kappa/2 * (tr X - 1)².

Two kernels share the same proposal family and MH correction and differ only
in the drift written in congruence coordinates ``S``:

* ``geom_mala``: ``M_X = -h X^{-1/2} grad_g(Phi) X^{-1/2}``
* ``naive_euclid_drift``: ``M_X = -h grad(Phi)``, the Euclidean gradient
  step placed directly in ``S`` without the metric congruence, where
  ``grad(Phi) = X⁻¹ grad_g(Phi) X⁻¹``.

The proposal is ``S = M_X + sqrt(2h) Z`` with ``Z`` standard normal in the
orthonormal coordinates of :func:`conegeo.spdgeo.to_coords`, mapped through
``Y = Exp_X(S)``.  Its density with respect to ``vol_g`` carries the
exponential-map Jacobian ``1 / j(S)``.
"""
from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInput, NotPositiveDefinite, StepTooLarge
from .spdgeo import (MAX_STEP_NORM, coord_dim, exp_jacobian_log, exp_jacobian_log_from_eigs,
                     from_coords, log_map)
from .symcore import SpdMatrix, sym

log = logging.getLogger(__name__)

KERNELS = ("geom_mala", "naive_euclid_drift")
# per-kernel defaults from a pilot grid {0.01, 0.02, 0.03, 0.05, 0.08} at the
# default potential, maximizing the smallest ESS over the four observables
DEFAULT_H = {"geom_mala": 0.03, "naive_euclid_drift": 0.02}
OBSERVABLES = ("trace", "logdet", "lambda_min", "dist_sq")


@dataclass(frozen=True)
class PotentialParams:
    lam: float = 12.0
    beta: float = 2.0
    kappa: float = 10.0
    X0: np.ndarray = field(default_factory=lambda: 0.45 * np.eye(3))

    def __post_init__(self):
        # lam = 0 isolates the other terms; sampling needs lam > 0 or kappa > 0
        if not (self.lam >= 0 and self.beta >= 0 and self.kappa >= 0):
            raise InvalidInput("lam, beta and kappa must be >= 0")
        X0 = SpdMatrix(self.X0).array
        object.__setattr__(self, "X0", X0)

    @property
    def d(self) -> int:
        return self.X0.shape[0]

    @classmethod
    def isotropic(cls, d: int = 3, x0_scale: float = 0.45, **kw) -> "PotentialParams":
        return cls(X0=x0_scale * np.eye(d), **kw)


@dataclass(frozen=True)
class SamplerConfig:
    """Run settings; ``h=None`` picks the kernel's entry in ``DEFAULT_H``."""

    h: float | None = None
    n_steps: int = 20_000
    n_chains: int = 4
    burn_in_fraction: float = 0.5
    seed: int = 0
    kernel: str = "geom_mala"
    keep_states: bool = True

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise InvalidInput(f"unknown kernel {self.kernel!r}; expected one of {KERNELS}")
        if self.h is None:
            object.__setattr__(self, "h", DEFAULT_H[self.kernel])
        if not self.h > 0:
            raise InvalidInput("step size h must be > 0")
        if self.n_steps < 1 or self.n_chains < 1:
            raise InvalidInput("n_steps and n_chains must be >= 1")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise InvalidInput("burn_in_fraction must lie in [0, 1)")

    @property
    def burn_in(self) -> int:
        return int(self.burn_in_fraction * self.n_steps)


class _Point:
    """A state ``X`` with everything the MH step needs, computed once."""

    __slots__ = ("X", "Xh", "Xmh", "eigs", "logC", "dist_sq", "phi", "Sgrad")

    def __init__(self, X: np.ndarray, p: PotentialParams):
        w, Q = np.linalg.eigh(X)
        if not w[0] > 0.0:
            raise NotPositiveDefinite(f"smallest eigenvalue {w[0]:.3e} <= 0")
        r = np.sqrt(w)
        self.X = X
        self.eigs = w
        self.Xh = sym((Q * r) @ Q.T)
        self.Xmh = sym((Q / r) @ Q.T)
        c, P = np.linalg.eigh(sym(self.Xmh @ p.X0 @ self.Xmh))
        lc = np.log(c)
        self.logC = sym((P * lc) @ P.T)
        self.dist_sq = float(lc @ lc)
        logdet = float(np.sum(np.log(w)))
        tr = float(np.sum(w))
        self.phi = (0.5 * p.lam * self.dist_sq - p.beta * logdet
                    + 0.5 * p.kappa * (tr - 1.0) ** 2)
        # X^{-1/2} grad_g(Phi) X^{-1/2}
        self.Sgrad = sym(-p.lam * self.logC - p.beta * np.eye(X.shape[0])
                         + p.kappa * (tr - 1.0) * X)

    def drift(self, h: float, kernel: str) -> np.ndarray:
        M = -h * self.Sgrad
        if kernel == "naive_euclid_drift":
            # Euclidean gradient X^{-1/2} Sgrad X^{-1/2}, used as if it were S
            M = sym(self.Xmh @ M @ self.Xmh)
        return M

    def observables(self) -> tuple[float, float, float, float]:
        w = self.eigs
        return float(np.sum(w)), float(np.sum(np.log(w))), float(w[0]), self.dist_sq


def _point(X, p: PotentialParams) -> _Point:
    return _Point(sym(X.array if isinstance(X, SpdMatrix) else X), p)


def potential(X, p: PotentialParams) -> float:
    """``lam/2 d_AI(X, X0)² - beta log det X + kappa/2 (tr X - 1)²``."""
    return _point(X, p).phi


def riemannian_grad(X, p: PotentialParams) -> np.ndarray:
    """``grad_g Phi = X (grad Phi) X``, returned as a symmetric matrix."""
    pt = _point(X, p)
    return sym(pt.Xh @ pt.Sgrad @ pt.Xh)


def euclidean_grad(X, p: PotentialParams) -> np.ndarray:
    pt = _point(X, p)
    return sym(pt.Xmh @ pt.Sgrad @ pt.Xmh)


def drift_S(X, p: PotentialParams, h: float, kernel: str) -> np.ndarray:
    """Drift matrix in congruence coordinates for the chosen kernel."""
    if kernel not in KERNELS:
        raise InvalidInput(f"unknown kernel {kernel!r}")
    return _point(X, p).drift(h, kernel)


def _log_gauss(S: np.ndarray, M: np.ndarray, h: float) -> float:
    n = coord_dim(S.shape[0])
    R = S - M
    return -0.5 * n * math.log(4.0 * math.pi * h) - float(np.sum(R * R)) / (4.0 * h)


def _draw_increment(rng: np.random.Generator, d: int, M: np.ndarray, h: float) -> np.ndarray:
    Z = from_coords(rng.standard_normal(coord_dim(d)), d)
    return M + math.sqrt(2.0 * h) * Z


def _exp_at(pt: _Point, S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(Y, eigenvalues of S)`` for ``Y = X^{1/2} exp(S) X^{1/2}``."""
    if not np.all(np.isfinite(S)) or np.linalg.norm(S) > MAX_STEP_NORM:
        raise StepTooLarge("proposal increment too large")
    s, V = np.linalg.eigh(S)
    E = (V * np.exp(s)) @ V.T
    return sym(pt.Xh @ E @ pt.Xh), s


def propose(X, p: PotentialParams, cfg: SamplerConfig,
            rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``S = M_X + sqrt(2h) Z`` and return ``(Exp_X(S), S)``."""
    pt = _point(X, p)
    S = _draw_increment(rng, pt.X.shape[0], pt.drift(cfg.h, cfg.kernel), cfg.h)
    Y, _ = _exp_at(pt, S)
    return Y, S


def log_proposal_density(X, Y, p: PotentialParams, cfg: SamplerConfig) -> float:
    """``log q(X -> Y)`` with respect to ``vol_g``: Gaussian in ``S`` minus ``log j(S)``."""
    pt = _point(X, p)
    S = log_map(pt.X, Y)
    return _log_gauss(S, pt.drift(cfg.h, cfg.kernel), cfg.h) - exp_jacobian_log(S)


def log_accept_ratio(X, Y, p: PotentialParams, cfg: SamplerConfig) -> float:
    """``log [exp(-Phi(Y)) q(Y->X)] - log [exp(-Phi(X)) q(X->Y)]``."""
    return (-potential(Y, p) + log_proposal_density(Y, X, p, cfg)
            + potential(X, p) - log_proposal_density(X, Y, p, cfg))


def acceptance_probability(X, Y, p: PotentialParams, cfg: SamplerConfig) -> float:
    return math.exp(min(0.0, log_accept_ratio(X, Y, p, cfg)))


class _Kernel:
    """Carries the current point between steps so each state is factored once."""

    def __init__(self, p: PotentialParams, cfg: SamplerConfig, X):
        self.p, self.cfg = p, cfg
        self.cur = _point(X, p)
        self.M = self.cur.drift(cfg.h, cfg.kernel)
        self.failures = 0

    def step(self, rng: np.random.Generator) -> bool:
        p, h, kernel = self.p, self.cfg.h, self.cfg.kernel
        cur = self.cur
        S = _draw_increment(rng, cur.X.shape[0], self.M, h)
        u = rng.random()
        try:
            with np.errstate(over="raise", divide="raise", invalid="raise", under="ignore"):
                Y, s = _exp_at(cur, S)
                new = _Point(Y, p)
                # reverse increment T = log(Y^{-1/2} X Y^{-1/2})
                T, t = _sym_log(new.Xmh @ cur.X @ new.Xmh)
                MY = new.drift(h, kernel)
                log_fwd = _log_gauss(S, self.M, h) - exp_jacobian_log_from_eigs(s)
                log_rev = _log_gauss(T, MY, h) - exp_jacobian_log_from_eigs(t)
                log_r = -new.phi + log_rev + cur.phi - log_fwd
        except (StepTooLarge, NotPositiveDefinite, np.linalg.LinAlgError,
                FloatingPointError) as exc:
            self.failures += 1
            log.warning("numeric failure in proposal, rejecting: %s", exc)
            return False
        if not math.isfinite(log_r):
            self.failures += 1
            log.warning("non-finite acceptance ratio, rejecting")
            return False
        if log_r >= 0.0 or u < math.exp(log_r):
            self.cur, self.M = new, MY
            return True
        return False


def _sym_log(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Matrix log of an SPD matrix together with its (ascending) eigenvalues."""
    w, Q = np.linalg.eigh(sym(A))
    if not w[0] > 0.0:
        raise NotPositiveDefinite("log of a non-PD matrix")
    lw = np.log(w)
    return sym((Q * lw) @ Q.T), lw


def mh_step(X, p: PotentialParams, cfg: SamplerConfig,
            rng: np.random.Generator) -> tuple[np.ndarray, bool, dict]:
    """One Metropolis-adjusted step from ``X``.

    Numeric failures while evaluating the proposal count as rejections.
    """
    k = _Kernel(p, cfg, X)
    accepted = k.step(rng)
    row = dict(zip(OBSERVABLES, k.cur.observables()), accepted=accepted)
    return k.cur.X, accepted, row


@dataclass
class ChainTrace:
    """Per-step record of one chain; row ``k`` is the state after step ``k + 1``."""

    kernel: str
    chain_id: int
    accepted: np.ndarray
    observables: dict[str, np.ndarray]
    wall_ns: np.ndarray
    burn_in: int
    states: np.ndarray | None = None
    failures: int = 0

    @property
    def n_steps(self) -> int:
        return self.accepted.size

    @property
    def acceptance_rate(self) -> float:
        return float(np.count_nonzero(self.accepted)) / self.n_steps

    @property
    def wall_seconds(self) -> float:
        return float(np.sum(self.wall_ns)) * 1e-9

    def kept(self, name: str) -> np.ndarray:
        """Post-burn-in series of one observable."""
        return self.observables[name][self.burn_in:]

    def kept_states(self) -> np.ndarray:
        if self.states is None:
            raise InvalidInput("chain was run without keep_states")
        return self.states[self.burn_in:]


def chain_rng(seed: int, chain_id: int, kernel: str) -> np.random.Generator:
    """Independent stream per (seed, kernel, chain)."""
    return np.random.default_rng(np.random.SeedSequence([seed, KERNELS.index(kernel), chain_id]))


def run_chain(p: PotentialParams, cfg: SamplerConfig, chain_id: int, X_init=None) -> ChainTrace:
    rng = chain_rng(cfg.seed, chain_id, cfg.kernel)
    kern = _Kernel(p, cfg, p.X0 if X_init is None else X_init)
    N, d = cfg.n_steps, p.d
    accepted = np.zeros(N, dtype=bool)
    obs = np.empty((N, len(OBSERVABLES)))
    wall = np.empty(N, dtype=np.int64)
    states = np.empty((N, d, d)) if cfg.keep_states else None
    clock = time.perf_counter_ns
    for k in range(N):
        t0 = clock()
        accepted[k] = kern.step(rng)
        wall[k] = clock() - t0
        obs[k] = kern.cur.observables()
        if states is not None:
            states[k] = kern.cur.X
    return ChainTrace(
        kernel=cfg.kernel, chain_id=chain_id, accepted=accepted,
        observables={name: obs[:, i].copy() for i, name in enumerate(OBSERVABLES)},
        wall_ns=wall, burn_in=cfg.burn_in, states=states, failures=kern.failures,
    )


def _run_chain_args(args):
    return run_chain(*args)


def run_chains(p: PotentialParams, cfg: SamplerConfig, workers: int | None = None) -> list[ChainTrace]:
    """Run ``cfg.n_chains`` independent chains started at ``X0``.

    Results do not depend on ``workers``: every chain owns its RNG stream.
    """
    if p.d < 1:
        raise InvalidInput("dimension must be >= 1")
    workers = min(cfg.n_chains, os.cpu_count() or 1) if workers is None else workers
    jobs = [(p, cfg, c) for c in range(cfg.n_chains)]
    if workers <= 1:
        return [_run_chain_args(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_chain_args, jobs))


def normalize_trace_one(X) -> np.ndarray:
    """Project onto the trace-one slice by ``X / tr X``."""
    X = SpdMatrix(X).array
    return X / np.trace(X)


def with_kernel(cfg: SamplerConfig, kernel: str, h: float | None = None) -> SamplerConfig:
    """Copy of ``cfg`` for another kernel; ``h=None`` takes that kernel's default."""
    return replace(cfg, kernel=kernel, h=h)


def pilot_tune(p: PotentialParams, kernel: str, grid=(0.01, 0.02, 0.03, 0.05, 0.08),
               n_steps: int = 4000, n_chains: int = 2, seed: int = 12345) -> dict[float, float]:
    """Smallest per-observable ESS of a short run for each ``h`` in ``grid``."""
    from .diagnostics import ess_total

    out = {}
    for h in grid:
        cfg = SamplerConfig(h=h, n_steps=n_steps, n_chains=n_chains, seed=seed,
                            kernel=kernel, keep_states=False)
        traces = run_chains(p, cfg, workers=1)
        out[h] = min(ess_total([t.kept(o) for t in traces]) for o in OBSERVABLES)
    return out
