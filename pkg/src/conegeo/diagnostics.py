"""MCMC diagnostics: split-R̂, Geyer ESS, MCSE, z-scores and a Poincaré proxy.

Conventions for degenerate input are fixed so that edge cases are testable:
a constant series has ESS 1 and constant chains have R̂ 1.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateVariance, InvalidInput

EIGENGAP_MIN = 1e-6
HIST_BINS = 60


def split_rhat(chains: Sequence[np.ndarray]) -> float:
    """Split-R̂ of one scalar observable over several chains.

    Each chain is cut into two halves (a middle sample is dropped for odd
    lengths) and the classic ``sqrt((n-1)/n + B/(n W))`` is returned.
    """
    chains = [np.asarray(c, dtype=float).ravel() for c in chains]
    if len(chains) < 2:
        raise InvalidInput("split-R̂ needs at least 2 chains")
    n_min = min(c.size for c in chains)
    if n_min < 4:
        raise InvalidInput("each chain needs at least 4 samples")
    n = n_min // 2
    halves = []
    for c in chains:
        c = c[:n_min]
        halves.append(c[:n])
        halves.append(c[-n:])
    H = np.stack(halves)
    means = H.mean(axis=1)
    W = float(H.var(axis=1, ddof=1).mean())
    B = n * float(means.var(ddof=1))
    if W == 0.0:
        return 1.0 if B == 0.0 else math.inf
    return math.sqrt((n - 1) / n + B / (n * W))


def autocorrelation(x: np.ndarray) -> np.ndarray:
    """Normalized autocorrelation of a series via zero-padded FFT."""
    x = np.asarray(x, dtype=float)
    n = x.size
    y = x - x.mean()
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(y, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n]
    if acov[0] <= 0.0:
        return np.ones(1)
    return acov / acov[0]


def ess(series) -> float:
    """Geyer initial-monotone-sequence ESS of one chain, clamped to ``[1, N]``."""
    x = np.asarray(series, dtype=float).ravel()
    N = x.size
    if N < 8:
        raise InvalidInput("ESS needs at least 8 samples")
    if np.ptp(x) == 0.0:
        return 1.0
    rho = autocorrelation(x)
    # paired sums Gamma_k = rho_{2k} + rho_{2k+1}
    n_pairs = N // 2
    gam = rho[0:2 * n_pairs:2] + rho[1:2 * n_pairs:2]
    neg = np.nonzero(gam <= 0.0)[0]
    K = int(neg[0]) if neg.size else n_pairs
    gam = np.minimum.accumulate(gam[:max(K, 1)])
    tau = -1.0 + 2.0 * float(np.sum(gam))
    tau = max(tau, 1.0 / N)
    return float(min(max(N / tau, 1.0), N))


def ess_total(chains: Sequence[np.ndarray]) -> float:
    """Sum of per-chain ESS values."""
    return float(sum(ess(c) for c in chains))


def mcse(pooled, ess_tot: float) -> float:
    """``sd / sqrt(ESS)`` with the pooled sample standard deviation."""
    if not ess_tot >= 1.0:
        raise InvalidInput("ESS must be >= 1")
    pooled = np.asarray(pooled, dtype=float).ravel()
    sd = float(pooled.std(ddof=1)) if pooled.size > 1 else 0.0
    return mcse_from_sd(sd, ess_tot)


def mcse_from_sd(sd: float, ess_tot: float) -> float:
    if not ess_tot >= 1.0:
        raise InvalidInput("ESS must be >= 1")
    return sd / math.sqrt(ess_tot)


def zscore(mean_a: float, mcse_a: float, mean_b: float, mcse_b: float) -> float:
    """Standardized mean difference between two estimates."""
    den = mcse_a ** 2 + mcse_b ** 2
    if not den > 0.0:
        raise DegenerateVariance("both MCSEs are zero")
    return (mean_a - mean_b) / math.sqrt(den)


def poincare_proxy(values, grad_sq) -> float:
    """Mean squared Riemannian gradient norm over the sample variance."""
    values = np.asarray(values, dtype=float).ravel()
    grad_sq = np.asarray(grad_sq, dtype=float).ravel()
    if values.size < 2:
        raise InvalidInput("need at least 2 samples")
    var = float(values.var(ddof=1))
    if var < 1e-14:
        raise DegenerateVariance(f"sample variance {var:.3e} too small")
    return float(np.mean(grad_sq)) / var


# --- observables and their squared Riemannian gradient norms ---------------

@dataclass(frozen=True)
class Observable:
    """Scalar function of an SPD state with ``|grad_g h|²_g`` in closed form.

    ``grad_sq`` may return NaN where the gradient is undefined; such samples
    are dropped from the Poincaré proxy and counted.
    """

    name: str
    value: Callable[[np.ndarray], float]
    grad_sq: Callable[[np.ndarray], float]


def _lambda_min_grad_sq(X: np.ndarray) -> float:
    w, Q = np.linalg.eigh(X)
    if w.size > 1 and w[1] - w[0] <= EIGENGAP_MIN:
        return math.nan
    u = Q[:, 0]
    return float(u @ X @ u) ** 2


def _dist_sq(X0: np.ndarray) -> Callable[[np.ndarray], float]:
    w0, Q0 = np.linalg.eigh(X0)
    X0mh = (Q0 / np.sqrt(w0)) @ Q0.T

    def f(X):
        c = np.linalg.eigvalsh(X0mh @ X @ X0mh)
        return float(np.sum(np.log(c) ** 2))
    return f


def linear_functional(C: np.ndarray, name: str = "trCX") -> Observable:
    """``h(X) = tr(C X)`` with ``|grad_g h|² = tr(X C X C)``."""
    C = np.asarray(C, dtype=float)
    return Observable(
        name,
        lambda X: float(np.sum(C * X)),
        lambda X: float(np.sum((X @ C) * (X @ C).T)),
    )


def canonical_observables(X0: np.ndarray) -> list[Observable]:
    """The four reported observables: trace, log det, smallest eigenvalue, squared distance."""
    d = X0.shape[0]
    dist_sq = _dist_sq(X0)
    trace = linear_functional(np.eye(d), "trace")
    return [
        trace,
        Observable("logdet", lambda X: float(np.linalg.slogdet(X)[1]), lambda X: float(d)),
        Observable("lambda_min", lambda X: float(np.linalg.eigvalsh(X)[0]), _lambda_min_grad_sq),
        Observable("dist_sq", dist_sq, lambda X: 4.0 * dist_sq(X)),
    ]


def poincare_for_states(states: np.ndarray, obs: Observable) -> tuple[float, int]:
    """``(rho_hat, n_excluded)`` over a stack of states."""
    vals = np.array([obs.value(X) for X in states])
    g2 = np.array([obs.grad_sq(X) for X in states])
    ok = np.isfinite(g2)
    return poincare_proxy(vals, g2[ok]) if ok.any() else math.nan, int((~ok).sum())


# --- ECDF / histogram export ------------------------------------------------

def ecdf(samples) -> tuple[np.ndarray, np.ndarray]:
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise InvalidInput("empty sample")
    return x, np.arange(1, x.size + 1) / x.size


def shared_histograms(samples_by_method: dict[str, np.ndarray],
                      bins: int = HIST_BINS) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Histogram counts per method on common edges spanning the union of samples."""
    arrays = {k: np.asarray(v, dtype=float).ravel() for k, v in samples_by_method.items()}
    if not arrays or any(a.size == 0 for a in arrays.values()):
        raise InvalidInput("every method needs at least one sample")
    lo = min(a.min() for a in arrays.values())
    hi = max(a.max() for a in arrays.values())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    return edges, {k: np.histogram(a, bins=edges)[0] for k, a in arrays.items()}


def ecdf_and_histogram_csv(samples_by_method: dict[str, np.ndarray]) -> tuple[str, str]:
    """``(ecdf_csv, hist_csv)`` text for one observable across methods."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "x", "ecdf"])
    for method, s in samples_by_method.items():
        x, F = ecdf(s)
        w.writerows((method, repr(float(a)), repr(float(b))) for a, b in zip(x, F))
    edges, counts = shared_histograms(samples_by_method)
    hbuf = io.StringIO()
    hw = csv.writer(hbuf, lineterminator="\n")
    methods = list(counts)
    hw.writerow(["bin_lo", "bin_hi", *methods])
    for i in range(edges.size - 1):
        hw.writerow([repr(float(edges[i])), repr(float(edges[i + 1])),
                     *(int(counts[m][i]) for m in methods)])
    return buf.getvalue(), hbuf.getvalue()


# --- per-method report ------------------------------------------------------

@dataclass
class ObservableSummary:
    mean: float
    sd: float
    ess: float
    ess_per_sec: float
    mcse: float
    rhat: float
    rho_hat: float
    rho_excluded: int = 0


@dataclass
class MethodReport:
    method: str
    runtime_per_chain: float
    acceptance_mean: float
    acceptance_sd: float
    observables: dict[str, ObservableSummary] = field(default_factory=dict)

    @property
    def rhat_max(self) -> float:
        return max(s.rhat for s in self.observables.values())

    @property
    def rho_min(self) -> float:
        vals = [s.rho_hat for s in self.observables.values() if math.isfinite(s.rho_hat)]
        return min(vals) if vals else math.nan


def summarize_method(method: str, kept: dict[str, list[np.ndarray]],
                     acceptance: Sequence[float], runtimes: Sequence[float],
                     kept_states: list[np.ndarray] | None,
                     observables: Sequence[Observable]) -> MethodReport:
    """Build a :class:`MethodReport` from post-burn-in series.

    ``kept`` maps observable name to per-chain series.  ``runtimes`` are wall
    seconds per chain; ESS/sec is total ESS over total runtime.  When
    ``kept_states`` is given, observables not present in ``kept`` are evaluated
    from the states and every Poincaré proxy uses the closed-form gradients.
    """
    acc = np.asarray(acceptance, dtype=float)
    total_time = float(np.sum(runtimes))
    rep = MethodReport(method, total_time / len(runtimes), float(acc.mean()),
                       float(acc.std(ddof=1)) if acc.size > 1 else 0.0)
    pooled_states = np.concatenate(kept_states) if kept_states is not None else None
    for obs in observables:
        series = kept.get(obs.name)
        if series is None:
            if kept_states is None:
                continue
            series = [np.array([obs.value(X) for X in s]) for s in kept_states]
        pooled = np.concatenate(series)
        e = ess_total(series)
        rho, excl = (poincare_for_states(pooled_states, obs)
                     if pooled_states is not None else (math.nan, 0))
        rep.observables[obs.name] = ObservableSummary(
            mean=float(pooled.mean()), sd=float(pooled.std(ddof=1)), ess=e,
            ess_per_sec=e / total_time if total_time > 0 else math.inf,
            mcse=mcse(pooled, e), rhat=split_rhat(series), rho_hat=rho, rho_excluded=excl,
        )
    return rep


def cross_method_z(a: MethodReport, b: MethodReport) -> dict[str, float]:
    return {name: zscore(sa.mean, sa.mcse, b.observables[name].mean, b.observables[name].mcse)
            for name, sa in a.observables.items() if name in b.observables}


REPORT_COLUMNS = ("method", "observable", "mean", "sd", "ess", "ess_per_sec", "mcse",
                  "rhat", "rho_hat", "rho_excluded", "acceptance_mean", "acceptance_sd",
                  "runtime_per_chain")


def report_csv(reports: Sequence[MethodReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in reports:
        for name, s in r.observables.items():
            w.writerow([r.method, name, *(repr(float(v)) for v in
                        (s.mean, s.sd, s.ess, s.ess_per_sec, s.mcse, s.rhat, s.rho_hat)),
                        s.rho_excluded, repr(r.acceptance_mean), repr(r.acceptance_sd),
                        repr(r.runtime_per_chain)])
    return buf.getvalue()


def format_tables(a: MethodReport, b: MethodReport) -> str:
    """Plain-text tables: core diagnostics, pooled marginals, MCSE and z-scores."""
    core = ("logdet", "lambda_min", "dist_sq")
    lines = ["Table 1: core diagnostics",
             f"{'method':<22}{'runtime':>9}{'acc':>16}{'Rhat_max':>11}"
             + "".join(f"{'ESS/s ' + n:>18}" for n in core)]
    for r in (a, b):
        lines.append(f"{r.method:<22}{r.runtime_per_chain:>9.2f}"
                     f"{f'{r.acceptance_mean:.3f}+-{r.acceptance_sd:.3f}':>16}{r.rhat_max:>11.6f}"
                     + "".join(f"{r.observables[n].ess_per_sec:>18.1f}" for n in core))
    names = list(a.observables)
    lines += ["", "Table 2: pooled marginals (mean+-sd) and rho_min",
              f"{'method':<22}" + "".join(f"{n:>22}" for n in names) + f"{'rho_min':>10}"]
    for r in (a, b):
        cells = "".join(f"{f'{r.observables[n].mean:.4f}+-{r.observables[n].sd:.4f}':>22}"
                        for n in names)
        lines.append(f"{r.method:<22}{cells}{r.rho_min:>10.2f}")
    z = cross_method_z(a, b)
    lines += ["", "Table 3: cross-method agreement",
              f"{'obs':<12}{'mean_a':>12}{'mean_b':>12}{'ESS_a':>11}{'ESS_b':>11}"
              f"{'MCSE_a':>11}{'MCSE_b':>11}{'z':>8}"]
    for n in names:
        sa, sb = a.observables[n], b.observables[n]
        lines.append(f"{n:<12}{sa.mean:>12.6f}{sb.mean:>12.6f}{sa.ess:>11.1f}{sb.ess:>11.1f}"
                     f"{sa.mcse:>11.6f}{sb.mcse:>11.6f}{z[n]:>8.3f}")
    return "\n".join(lines) + "\n"
