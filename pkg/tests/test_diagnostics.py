import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from conegeo import diagnostics as dg
from conegeo.errors import DegenerateVariance, InvalidInput
from conegeo.spdgeo import ai_distance, ai_inner, log_map
from conegeo.symcore import random_spd, random_sym


def _ar1(rng, phi, n):
    x = np.empty(n)
    x[0] = rng.standard_normal() / math.sqrt(1 - phi**2)
    eps = rng.standard_normal(n)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + eps[t]
    return x


def _fd_grad_sq(f, X, e=1e-6):
    """Squared Riemannian gradient norm from finite differences in an orthonormal basis.

    With ``G`` the Gram matrix of the metric in a basis ``E_i`` and ``df``
    the directional derivatives, ``|grad f|² = dfᵀ G⁻¹ df``.
    """
    d = X.shape[0]
    E = []
    for i in range(d):
        for j in range(i, d):
            B = np.zeros((d, d))
            B[i, j] = B[j, i] = 1.0
            E.append(B)
    df = np.array([(f(X + e * B) - f(X - e * B)) / (2 * e) for B in E])
    G = np.array([[ai_inner(X, A, B) for B in E] for A in E])
    return float(df @ np.linalg.solve(G, df))


class TestRhat:
    def test_constant_chains(self):
        assert dg.split_rhat([np.full(100, 3.0)] * 4) == 1.0

    def test_iid(self, rng):
        r = dg.split_rhat([rng.standard_normal(10_000) for _ in range(4)])
        assert 0.999 <= r <= 1.01

    def test_disjoint_constants(self):
        assert dg.split_rhat([np.zeros(100), np.full(100, 10.0)]) == math.inf

    def test_disjoint_noisy(self, rng):
        r = dg.split_rhat([rng.standard_normal(500), 10 + rng.standard_normal(500)])
        assert r > 1.1 * 3

    def test_detects_drift_within_chain(self):
        t = np.linspace(0, 5, 1000)
        assert dg.split_rhat([t, t + 0.01]) > 1.1

    def test_too_few(self):
        with pytest.raises(InvalidInput):
            dg.split_rhat([np.zeros(10)])


class TestEss:
    def test_iid(self, rng):
        N = 10_000
        assert 0.8 * N <= dg.ess(rng.standard_normal(N)) <= 1.2 * N

    def test_constant(self):
        assert dg.ess(np.ones(50)) == 1.0

    def test_ar1(self, rng):
        N, phi = 100_000, 0.9
        expected = N * (1 - phi) / (1 + phi)
        assert dg.ess(_ar1(rng, phi, N)) == pytest.approx(expected, rel=0.25)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(8, 400), st.integers(0, 2**31))
    def test_clamped(self, n, seed):
        x = np.random.default_rng(seed).standard_normal(n)
        assert 1.0 <= dg.ess(x) <= n

    def test_antithetic_is_clamped(self):
        x = np.tile([1.0, -1.0], 100)
        assert dg.ess(x) <= x.size

    def test_autocorrelation_lag0(self, rng):
        rho = dg.autocorrelation(rng.standard_normal(257))
        assert rho[0] == pytest.approx(1.0)
        assert rho.size == 257


class TestMcseZ:
    def test_trivial(self):
        assert dg.mcse_from_sd(1.0, 100.0) == pytest.approx(0.1)
        assert dg.mcse_from_sd(0.0, 100.0) == 0.0
        assert dg.mcse(np.ones(10), 5.0) == 0.0

    def test_reference_row(self):
        """The reported tr(X) row: sd 0.110553 with ESS 8099.793 gives MCSE 0.001228."""
        assert round(dg.mcse_from_sd(0.110553, 8099.793), 6) == 0.001228
        z = dg.zscore(1.387931, 0.001228, 1.389661, 0.001676)
        assert round(z, 2) == -0.83
        assert z == pytest.approx(-0.833, abs=5e-4)

    def test_z_properties(self):
        assert dg.zscore(1.0, 0.1, 1.0, 0.2) == 0.0
        assert dg.zscore(1.0, 0.1, 2.0, 0.2) == -dg.zscore(2.0, 0.2, 1.0, 0.1)
        with pytest.raises(DegenerateVariance):
            dg.zscore(1.0, 0.0, 2.0, 0.0)

    def test_ess_below_one(self):
        with pytest.raises(InvalidInput):
            dg.mcse_from_sd(1.0, 0.5)


class TestObservables:
    def _obs(self, X0):
        return {o.name: o for o in dg.canonical_observables(X0)}

    def test_logdet_norm_is_dimension(self, rng):
        for d in (2, 3, 5):
            X = random_spd(rng, d, 50)
            obs = self._obs(np.eye(d))
            assert obs["logdet"].grad_sq(X) == d
            assert _fd_grad_sq(obs["logdet"].value, X) == pytest.approx(d, rel=1e-7)

    def test_distance_norm(self, rng):
        X0 = random_spd(rng, 3)
        obs = self._obs(X0)["dist_sq"]
        for _ in range(5):
            X = random_spd(rng, 3, 20)
            d2 = ai_distance(X, X0) ** 2
            assert obs.value(X) == pytest.approx(d2, rel=1e-12)
            assert obs.grad_sq(X) == pytest.approx(4 * d2, rel=1e-8)
            # Riemannian gradient of d² is -2 Log_X(X0) mapped back: norm² = 4 |log|²
            assert 4 * np.sum(log_map(X, X0) ** 2) == pytest.approx(obs.grad_sq(X), rel=1e-8)

    def test_linear_and_trace(self, rng):
        X = random_spd(rng, 3, 10)
        C = random_sym(rng, 3)
        lin = dg.linear_functional(C)
        assert lin.grad_sq(X) == pytest.approx(_fd_grad_sq(lin.value, X), rel=1e-6)
        tr = self._obs(np.eye(3))["trace"]
        assert tr.grad_sq(X) == pytest.approx(np.trace(X @ X))

    def test_lambda_min(self, rng):
        X = random_spd(rng, 3, 10)
        lm = self._obs(np.eye(3))["lambda_min"]
        assert lm.grad_sq(X) == pytest.approx(_fd_grad_sq(lm.value, X), rel=1e-6)
        assert lm.grad_sq(X) == pytest.approx(np.linalg.eigvalsh(X)[0] ** 2)
        assert math.isnan(lm.grad_sq(np.diag([1.0, 1.0, 2.0])))


class TestPoincare:
    def test_logdet_reduction(self, rng):
        v = rng.standard_normal(500)
        assert dg.poincare_proxy(v, np.full(500, 3.0)) == pytest.approx(3.0 / v.var(ddof=1))

    def test_scale_invariance(self, rng):
        states = np.array([random_spd(rng, 3, 5) for _ in range(200)])
        lin = dg.linear_functional(np.diag([1.0, 2.0, 0.5]))
        lin2 = dg.linear_functional(2 * np.diag([1.0, 2.0, 0.5]))
        a, _ = dg.poincare_for_states(states, lin)
        b, _ = dg.poincare_for_states(states, lin2)
        assert a == pytest.approx(b, rel=1e-12)

    def test_degenerate(self):
        with pytest.raises(DegenerateVariance):
            dg.poincare_proxy(np.ones(10), np.ones(10))

    def test_excluded_count(self):
        states = np.array([np.eye(2), np.diag([0.5, 2.0]), np.diag([3.0, 1.0])])
        lm = {o.name: o for o in dg.canonical_observables(np.eye(2))}["lambda_min"]
        _, excl = dg.poincare_for_states(states, lm)
        assert excl == 1


class TestExport:
    def test_single_sample_ecdf(self):
        x, F = dg.ecdf([2.5])
        assert x.tolist() == [2.5] and F.tolist() == [1.0]

    def test_histogram_counts(self, rng):
        s = {"a": rng.standard_normal(1000), "b": rng.standard_normal(700) + 1}
        edges, counts = dg.shared_histograms(s)
        assert edges.size == dg.HIST_BINS + 1
        assert counts["a"].sum() == 1000 and counts["b"].sum() == 700

    def test_equal_law_ks(self, rng):
        a, b = rng.standard_normal(10_000), rng.standard_normal(10_000)
        xa, Fa = dg.ecdf(a)
        xb, Fb = dg.ecdf(b)
        grid = np.sort(np.concatenate([xa, xb]))
        Fa_g = np.searchsorted(xa, grid, side="right") / xa.size
        Fb_g = np.searchsorted(xb, grid, side="right") / xb.size
        D = np.abs(Fa_g - Fb_g).max()
        crit = 1.628 * math.sqrt(2 / 10_000)
        assert D < crit
        assert D == pytest.approx(scipy.stats.ks_2samp(a, b).statistic)

    def test_csv_text(self, rng):
        ecdf_txt, hist_txt = dg.ecdf_and_histogram_csv({"m": rng.standard_normal(20)})
        assert ecdf_txt.splitlines()[0] == "method,x,ecdf"
        assert len(ecdf_txt.splitlines()) == 21
        assert hist_txt.splitlines()[0] == "bin_lo,bin_hi,m"


class TestReport:
    def _report(self, rng, name, shift=0.0):
        X0 = np.eye(2)
        obs = dg.canonical_observables(X0)
        states = [np.array([random_spd(rng, 2, 3) * (1 + shift) for _ in range(100)])
                  for _ in range(3)]
        kept = {o.name: [np.array([o.value(X) for X in s]) for s in states] for o in obs}
        return dg.summarize_method(name, kept, [0.5, 0.6, 0.7], [1.0, 2.0, 3.0], states, obs)

    def test_summary_fields(self, rng):
        r = self._report(rng, "a")
        s = r.observables["logdet"]
        assert r.runtime_per_chain == 2.0
        assert r.acceptance_mean == pytest.approx(0.6)
        assert s.ess_per_sec == pytest.approx(s.ess / 6.0)
        assert s.rho_hat == pytest.approx(2.0 / s.sd**2)
        assert r.rhat_max == max(o.rhat for o in r.observables.values())
        assert r.rho_min == min(o.rho_hat for o in r.observables.values())

    def test_z_and_tables(self, rng):
        a, b = self._report(rng, "a"), self._report(rng, "b", 0.5)
        z = dg.cross_method_z(a, b)
        for n, v in z.items():
            sa, sb = a.observables[n], b.observables[n]
            assert v == (sa.mean - sb.mean) / math.sqrt(sa.mcse**2 + sb.mcse**2)
        txt = dg.format_tables(a, b)
        for title in ("Table 1", "Table 2", "Table 3"):
            assert title in txt
        rows = dg.report_csv([a, b]).splitlines()
        assert rows[0].split(",") == list(dg.REPORT_COLUMNS)
        assert len(rows) == 1 + 2 * 4
