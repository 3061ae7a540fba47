import numpy as np
import pytest
import scipy.stats as ss

from selfwalk.enumeration import endpoint_distribution
from selfwalk.geometry import ConeSpec, dual_drift
from selfwalk.paths import Pattern, validate_sites
from selfwalk.potentials import DegenerateModelError, GCParams, PhiSpec
from selfwalk.sampler import (
    ChainConfig,
    batch_means_error,
    estimate_cone_density,
    estimate_endpoint_covariance,
    estimate_pattern_frequency,
    estimate_speed,
    mcmc_sample,
)


def gof_pvalue(stats, exact):
    from collections import Counter

    cnt = Counter(map(tuple, stats.displacements.astype(int)))
    N = stats.n_samples
    keys = [k for k, p in exact.items() if p * N >= 10]
    obs = np.array([cnt.get(k, 0) for k in keys], dtype=float)
    expd = np.array([exact[k] * N for k in keys])
    rest_o, rest_e = N - obs.sum(), N - expd.sum()
    if rest_e > 5:
        obs = np.append(obs, rest_o)
        expd = np.append(expd, rest_e)
    chi2 = ((obs - expd) ** 2 / expd).sum()
    return float(ss.chi2.sf(chi2, len(obs) - 1))


class TestConfig:
    def test_validation(self):
        p = GCParams(np.zeros(2), 0.0)
        with pytest.raises(ValueError):
            ChainConfig(n=5, params=p, move_mix=(0.5, 0.5, 0.5))
        with pytest.raises(ValueError):
            ChainConfig(n=5, params=p, sweeps=10, burn_in=20)
        with pytest.raises(ValueError):
            ChainConfig(n=0, params=p)


class TestChain:
    def test_reproducible(self, saw_spec):
        cfg = ChainConfig(n=12, params=GCParams(np.array([0.2, 0.0]), 0.0),
                          sweeps=400, burn_in=50, thinning=2, seed=5)
        a = mcmc_sample(saw_spec, cfg)
        b = mcmc_sample(saw_spec, cfg)
        assert np.array_equal(a.displacements, b.displacements)
        assert a.acceptance == b.acceptance

    def test_chain_ids_differ(self, saw_spec):
        cfg = ChainConfig(n=12, params=GCParams(np.array([0.2, 0.0]), 0.0),
                          sweeps=400, burn_in=50, thinning=2, seed=5)
        a = mcmc_sample(saw_spec, cfg, chain_id=0)
        b = mcmc_sample(saw_spec, cfg, chain_id=1)
        assert not np.array_equal(a.displacements, b.displacements)

    def test_all_samples_valid_paths(self, dj_spec):
        cfg = ChainConfig(n=15, params=GCParams(np.array([0.3, 0.0]), 0.0),
                          sweeps=600, burn_in=100, thinning=3, seed=2,
                          record_paths=True)
        stats = mcmc_sample(dj_spec, cfg)
        for p in stats.paths:
            assert validate_sites(p.astype(np.int64))
            assert not p[0].any()  # rooted at the origin

    def test_saw_samples_self_avoiding(self, saw_spec):
        cfg = ChainConfig(n=14, params=GCParams(np.array([0.4, 0.0]), 0.0),
                          sweeps=500, burn_in=100, thinning=2, seed=8,
                          record_paths=True)
        stats = mcmc_sample(saw_spec, cfg)
        for p in stats.paths:
            sites = set(map(tuple, p.tolist()))
            assert len(sites) == len(p)

    def test_degenerate_model_raises(self):
        dead = PhiSpec(np.array([0.0, np.inf]))
        with pytest.raises(DegenerateModelError):
            mcmc_sample(dead, ChainConfig(n=5, params=GCParams(np.zeros(2), 0.0),
                                          sweeps=100, burn_in=10))

    def test_two_starts_agree(self, free_spec):
        # stationarity smoke test: two seeds, compatible means
        cfg1 = ChainConfig(n=24, params=GCParams(np.array([0.5]), 0.0),
                           sweeps=30000, burn_in=3000, thinning=4, seed=1)
        cfg2 = ChainConfig(n=24, params=GCParams(np.array([0.5]), 0.0),
                           sweeps=30000, burn_in=3000, thinning=4, seed=99)
        s1 = estimate_speed(mcmc_sample(free_spec, cfg1))
        s2 = estimate_speed(mcmc_sample(free_spec, cfg2))
        gap = abs(s1["v"][0] - s2["v"][0])
        sigma = np.hypot(s1["stderr"][0], s2["stderr"][0])
        assert gap <= 4 * sigma


class TestAgainstExactLaw:
    @pytest.mark.parametrize("model,h", [
        ("free", (0.0, 0.0)),
        ("saw", (0.3, 0.0)),
        ("dj", (0.2, 0.1)),
    ])
    def test_endpoint_gof(self, model, h, free_spec, saw_spec, dj_spec):
        spec = {"free": free_spec, "saw": saw_spec, "dj": dj_spec}[model]
        n = 7
        exact = endpoint_distribution(spec, list(h), n)
        cfg = ChainConfig(n=n, params=GCParams(np.array(h), 0.0),
                          sweeps=42000, burn_in=2000, thinning=2, seed=13)
        stats = mcmc_sample(spec, cfg)
        assert gof_pvalue(stats, exact) > 1e-3


class TestEstimators:
    def test_speed_tanh(self, free_spec):
        t = 0.5
        cfg = ChainConfig(n=48, params=GCParams(np.array([t]), 0.0),
                          sweeps=60000, burn_in=5000, thinning=4, seed=21)
        stats = mcmc_sample(free_spec, cfg)
        sd = estimate_speed(stats)
        assert abs(sd["v"][0] - np.tanh(t)) <= 3.5 * max(sd["stderr"][0], 1e-4)

    def test_symmetric_speed_zero(self, dj_spec):
        cfg = ChainConfig(n=20, params=GCParams(np.zeros(2), 0.0),
                          sweeps=20000, burn_in=2000, thinning=4, seed=3)
        sd = estimate_speed(mcmc_sample(dj_spec, cfg))
        assert abs(sd["v"][0]) <= 4 * sd["stderr"][0] + 1e-3

    def test_covariance_free(self, free_spec):
        cfg = ChainConfig(n=32, params=GCParams(np.zeros(2), 0.0),
                          sweeps=30000, burn_in=2000, thinning=4, seed=7)
        stats = mcmc_sample(free_spec, cfg)
        cov = estimate_endpoint_covariance({32: stats})
        assert cov["var_per_step"][32] == pytest.approx(0.5, rel=0.08)

    def test_cone_density_straightlike(self, free_spec, table_d1):
        # strong tilt in d=1: nearly straight paths, density near 1
        h = dual_drift(table_d1, [1]).h
        cone = ConeSpec(h, 0.1, 3, table_d1)
        cfg = ChainConfig(n=30, params=GCParams(np.array([2.5]), 0.0),
                          sweeps=8000, burn_in=1000, thinning=4, seed=4,
                          record_paths=True)
        stats = mcmc_sample(free_spec, cfg)
        r = estimate_cone_density(stats, cone)
        assert r["density"] > 0.8

    def test_cone_density_diffusive_small(self, free_spec, exact_table_d2):
        h = dual_drift(exact_table_d2, [1, 0]).h
        cone = ConeSpec(h, 0.1, 3, exact_table_d2)
        cfg = ChainConfig(n=40, params=GCParams(np.zeros(2), 0.0),
                          sweeps=4000, burn_in=500, thinning=4, seed=4,
                          record_paths=True)
        stats = mcmc_sample(free_spec, cfg)
        r = estimate_cone_density(stats, cone)
        assert r["density"] < 0.1

    def test_single_step_patterns_partition(self, saw_spec):
        # the four 1-step patterns partition the steps: frequencies sum to 1
        cfg = ChainConfig(n=16, params=GCParams(np.array([0.3, 0.0]), 0.0),
                          sweeps=3000, burn_in=500, thinning=3, seed=10,
                          record_paths=True)
        stats = mcmc_sample(saw_spec, cfg)
        total = 0.0
        for step in ([1, 0], [-1, 0], [0, 1], [0, -1]):
            pat = Pattern(np.array([[0, 0], step]))
            total += estimate_pattern_frequency(stats, pat)["frequency"]
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_batch_means_sane(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=4096)
        err = batch_means_error(x)
        assert err == pytest.approx(1 / np.sqrt(4096), rel=0.5)


class TestSpecExamples:
    def test_saw_cone_density_positive(self, saw_spec):
        # ballistic SAW at h=(0.5,0): a positive fraction of indices
        # are path cone points at delta = 0.1
        from selfwalk.geometry import build_norm_table

        table = build_norm_table(saw_spec, 1.2, d=2, height=1, n_max=12)
        hd = dual_drift(table, [1, 0]).h
        cone = ConeSpec(hd, 0.1, 3, table)
        cfg = ChainConfig(n=100, params=GCParams(np.array([0.5, 0.0]), 0.0),
                          sweeps=30000, burn_in=6000, thinning=6, seed=9,
                          record_paths=True)
        stats = mcmc_sample(saw_spec, cfg)
        r = estimate_cone_density(stats, cone)
        assert r["density"] > 0.01

    def test_pattern_variance_halves(self, saw_spec):
        # concentration: Var(N_eta / n) roughly halves when n doubles
        from selfwalk.paths import elementary_loop

        eta = elementary_loop()
        var = {}
        for n in (24, 48):
            cfg = ChainConfig(n=n, params=GCParams(np.array([0.5, 0.0]), 0.0),
                              sweeps=60000, burn_in=6000, thinning=6,
                              seed=600 + n, record_paths=True)
            stats = mcmc_sample(saw_spec, cfg)
            r = estimate_pattern_frequency(stats, eta)
            assert 0.0 < r["frequency"] < 1.0
            var[n] = r["variance"]
        ratio = var[48] / var[24]
        assert 0.5 * 0.7 <= ratio <= 0.5 * 1.3
