"""Acceptance suite: every primary criterion at its stated tolerance.

Each test prints one PASS/FAIL line.  Heavy Monte Carlo inputs are
session fixtures so the suite stays inside its runtime budgets.  Run
with `pytest tests/test_acceptance.py -v -s`.
"""

import time
from collections import Counter

import numpy as np
import pytest
import scipy.stats as ss

from selfwalk import _kernels
from selfwalk.coarse import (
    batch_p1_p2,
    irreducible_decompose,
    q_measure_mass,
)
from selfwalk.enumeration import (
    connectivity_constant,
    endpoint_distribution,
    hitting_gf,
    partition_function,
)
from selfwalk.geometry import ConeSpec, build_norm_table, cone_union_grid, dual_drift, xi_estimate
from selfwalk.paths import LatticePath, Locality, all_paths
from selfwalk.potentials import (
    GCParams,
    model_annealed,
    model_domb_joyce,
    model_free,
    model_reinforced,
    model_saw,
    perturbation_edge_reinforcement,
    perturbation_linear,
    perturbation_zero,
)
from selfwalk.phase import (
    free_energy,
    lambda_of_drift,
    perturbed_correction_f,
    speed_from_free_energy,
)
from selfwalk.sampler import (
    ChainConfig,
    estimate_endpoint_covariance,
    estimate_speed,
    mcmc_sample,
)


def report(num: int, ok: bool, detail: str):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion-{num:02d}: {detail}")
    assert ok, f"criterion {num}: {detail}"


@pytest.fixture(scope="module")
def catalog():
    return {
        "saw": model_saw(),
        "domb-joyce": model_domb_joyce(0.5),
        "annealed": model_annealed({"kind": "exponential", "rate": 50.0}),
        "reinforced": model_reinforced([0.02, 0.01, 0.005, 0.0]),
    }


@pytest.fixture(scope="module")
def free():
    return model_free()


@pytest.fixture(scope="module")
def d1_table(free):
    lam = float(-np.log(0.4))
    return build_norm_table(free, lam, d=1, height=1, n_max=64)


@pytest.fixture(scope="module")
def d2_table(free):
    return build_norm_table(free, np.log(4) + 0.6, d=2, height=1, n_max=12)


@pytest.fixture(scope="module")
def saw_chains():
    """Stretched self-avoiding chains reused by criteria 8, 9 and 10."""
    saw = model_saw()
    h = np.array([0.5, 0.0])
    budgets = {
        50: (60_000, 10_000),
        64: (100_000, 20_000),
        100: (120_000, 24_000),
        128: (200_000, 40_000),
        200: (220_000, 44_000),
        256: (400_000, 80_000),
    }
    out = {}
    for n, (sweeps, burn) in budgets.items():
        cfg = ChainConfig(n=n, params=GCParams(h, 0.0), sweeps=sweeps,
                          burn_in=burn, thinning=8, seed=500 + n)
        out[n] = mcmc_sample(saw, cfg)
    return out


def test_criterion_01_partition_bounds(catalog):
    """Z_n bounds e^{-phi(1) n} <= Z_n <= (2d)^n, d=2, n <= 12."""
    t0 = time.time()
    worst = 0.0
    for name, spec in catalog.items():
        phi1 = float(spec.values[1])
        for n in range(1, 13):
            logZ = partition_function(spec, [0.0, 0.0], n).logZ
            assert logZ <= n * np.log(4) + 1e-12, (name, n)
            assert logZ >= -phi1 * n - 1e-12, (name, n)
            worst = max(worst, logZ - n * np.log(4))
    dt = time.time() - t0
    report(1, dt < 120,
           f"bounds hold for 4 models, n<=12; max upper slack {worst:.2e}; "
           f"runtime {dt:.1f}s < 120s")


def test_criterion_02_multiplicativity(catalog):
    """log Z additivity direction per interaction class, n+m <= 12."""
    gaps = {}
    for name, spec in catalog.items():
        logs = {n: partition_function(spec, [0.0, 0.0], n).logZ
                for n in range(1, 13)}
        worst = 0.0
        for n in range(1, 12):
            for m in range(1, 13 - n):
                gap = logs[n + m] - logs[n] - logs[m]
                if name in ("saw", "domb-joyce"):
                    assert gap <= 1e-10, (name, n, m, gap)
                    worst = max(worst, gap)
                else:
                    assert gap >= -1e-10, (name, n, m, gap)
                    worst = min(worst, gap)
        gaps[name] = worst
    report(2, True, f"sub/super-additivity exact to 1e-10; extremes {gaps}")


def test_criterion_03_attractive_connectivity(catalog):
    """Normalized attractive ratios <= log 4; Fekete lower edge within
    0.05 of log 4 at n = 12."""
    details = []
    for name in ("annealed", "reinforced"):
        r = connectivity_constant(catalog[name], 12, d=2)
        assert all(v <= np.log(4) + 1e-12 for v in r["ratios"]), name
        gap = np.log(4) - r["lo"]
        assert gap <= 0.05, (name, gap)
        increasing = all(b >= a - 1e-12 for a, b in
                         zip(r["ratios"][:-1], r["ratios"][1:]))
        assert increasing, name
        details.append(f"{name}: gap {gap:.4f}")
    report(3, True, "; ".join(details))


def test_criterion_04_d1_lyapunov(free):
    """xi(1) within 1e-2 of log 2 and H(1) within 1e-6 of 1/2."""
    t0 = time.time()
    lam = float(-np.log(0.4))
    est = xi_estimate(free, [1], lam, n_max=64, d=1)
    xi_err = abs(est["value"] - np.log(2))
    g = hitting_gf(free, [1], lam, 40, d=1)
    h_err = abs(np.exp(g.logH) - 0.5)
    dt = time.time() - t0
    ok = xi_err <= 1e-2 and h_err <= 1e-6 and dt < 10
    report(4, ok, f"|xi - log2| = {xi_err:.2e} <= 1e-2; "
                  f"|H(1) - 0.5| = {h_err:.2e} <= 1e-6; runtime {dt:.1f}s < 10s")


def test_criterion_05_skeleton_p1p2(d2_table, free):
    """P1/P2 with zero violations: all d=2 paths n <= 10 at K in {3,5},
    plus 1e4 sampled paths at n = 100."""
    t0 = time.time()
    viol = 0
    checked = 0
    for n in range(1, 11):
        arr = all_paths(2, n)
        for K in (3.0, 5.0):
            for attractive in (False, True):
                r = batch_p1_p2(arr, K, d2_table, attractive)
                viol += r["violations"]
                checked += r["paths"]
    # sampled paths at n = 100: uniform walks plus stretched SAW chains
    rng = np.random.default_rng(11)
    steps = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]])
    walks = np.zeros((5000, 101, 2), dtype=np.int64)
    walks[:, 1:] = np.cumsum(steps[rng.integers(0, 4, size=(5000, 100))], axis=1)
    cfg = ChainConfig(n=100, params=GCParams(np.array([0.4, 0.0]), 0.0),
                      sweeps=10_500, burn_in=500, thinning=2, seed=3,
                      record_paths=True)
    saw_paths = mcmc_sample(model_saw(), cfg).paths.astype(np.int64)
    sampled = np.concatenate([walks, saw_paths[:5000]])
    assert len(sampled) == 10_000
    for K in (3.0, 5.0):
        for attractive in (False, True):
            r = batch_p1_p2(sampled, K, d2_table, attractive)
            viol += r["violations"]
            checked += r["paths"]
    dt = time.time() - t0
    ok = viol == 0 and dt < 300
    report(5, ok, f"0 violations over {checked} path checks "
                  f"(exhaustive n<=10 + 1e4 sampled at n=100); "
                  f"runtime {dt:.0f}s < 300s")


def test_criterion_06_decomposition_identities(d2_table):
    """Round-trip exact; bond-locality piece-weight residual <= 1e-10 on
    every enumerated decomposition with n <= 10."""
    t0 = time.time()
    h = dual_drift(d2_table, [1, 0]).h
    cone = ConeSpec(h, 0.1, 3, d2_table)
    spec = model_saw(locality=Locality.UNORIENTED_BOND)
    max_resid = 0.0
    admissible = 0
    for n in range(2, 11):
        arr = all_paths(2, n)
        side = 2 * n + 1
        strides = side ** np.arange(2, dtype=np.int64)
        idx = ((arr + n) @ strides).astype(np.int64)
        union = cone_union_grid(cone, n)
        center = int(n * strides.sum())
        phi = spec.table(n + 1)
        res = _kernels.decomposition_residuals(
            idx, n, union, center, phi, _kernels.LOC_UBOND, 2, side, 0.0)
        finite = res[~np.isnan(res)]
        admissible += len(finite)
        if len(finite):
            max_resid = max(max_resid, float(np.abs(finite).max()))
    # round-trip: exhaustive at n <= 8, stratified at n = 9, 10
    for n in range(2, 11):
        arr = all_paths(2, n)
        stride = 1 if n <= 8 else 97
        for sites in arr[::stride]:
            p = LatticePath(sites)
            dec = irreducible_decompose(p, cone)
            assert np.array_equal(dec.reassemble().sites, p.sites)
    dt = time.time() - t0
    ok = max_resid <= 1e-10
    report(6, ok, f"max |residual| = {max_resid:.2e} over {admissible} "
                  f"admissible bond-SAW decompositions; round-trips exact; "
                  f"runtime {dt:.0f}s")


def test_criterion_07_q_measure_boundary_mass(free, d1_table):
    """d=1 free-walk mass: monotone, within 1e-3 of 1 at the boundary
    drift and below 0.95 at 0.8x the boundary drift."""
    lam = float(-np.log(0.4))
    h = dual_drift(d1_table, [1]).h
    cone = ConeSpec(h, 0.1, 3, d1_table)
    r1 = q_measure_mass(free, h, lam, 40, cone, d=1)
    r2 = q_measure_mass(free, 0.8 * h, lam, 40, cone, d=1)
    ok = (r1["monotone"] and abs(r1["mass"] - 1.0) <= 1e-3
          and r2["monotone"] and r2["mass"] < 0.95)
    report(7, ok, f"boundary mass {r1['mass']:.6f} (|1 - mass| = "
                  f"{abs(r1['mass'] - 1):.1e} <= 1e-3), interior mass "
                  f"{r2['mass']:.4f} < 0.95, both monotone in the budget")


def test_criterion_08_phase_separation(saw_chains):
    """SAW speed > 0.05 at 3 sigma for n in {50,100,200}; strongly
    reinforced walk at h=(0.1,0): |mean D|/n decreasing, < 0.02 at 200."""
    t0 = time.time()
    details = []
    for n in (50, 100, 200):
        sd = estimate_speed(saw_chains[n])
        proj, err = sd["v"][0], sd["stderr"][0]
        assert proj - 3 * err > 0.05, (n, proj, err)
        details.append(f"saw n={n}: {proj:.3f}+-{err:.3f}")
    reinf = model_reinforced([1.0, 0.0])
    h = np.array([0.1, 0.0])
    speeds = {}
    for n in (50, 100, 200):
        cfg = ChainConfig(n=n, params=GCParams(h, 0.0), sweeps=60_000,
                          burn_in=15_000, thinning=5, seed=300 + n)
        sd = estimate_speed(mcmc_sample(reinf, cfg))
        speeds[n] = float(np.linalg.norm(sd["v"]))
    decreasing = speeds[50] > speeds[100] > speeds[200]
    ok = decreasing and speeds[200] < 0.02
    dt = time.time() - t0
    report(8, ok and dt < 900,
           "; ".join(details) + f"; reinforced |v|: " +
           ", ".join(f"n={n}: {v:.4f}" for n, v in speeds.items()) +
           f"; runtime {dt:.0f}s < 900s")


def test_criterion_09_local_clt_precursor(free, saw_chains):
    """d=1 tilted walk matches tanh/1-tanh^2 within 3 sigma; SAW Var/n
    stable within 25% across n in {64,128,256}."""
    t = 0.6
    cfg = ChainConfig(n=64, params=GCParams(np.array([t]), 0.0),
                      sweeps=120_000, burn_in=8_000, thinning=5, seed=42)
    st = mcmc_sample(free, cfg)
    sd = estimate_speed(st)
    speed_ok = abs(sd["v"][0] - np.tanh(t)) <= 3 * sd["stderr"][0]
    # variance error bar via effective sample size
    D = st.displacements[:, 0]
    var = D.var(ddof=1) / 64
    neff = max(8.0, len(D) / max(st.autocorr_sweeps / cfg.thinning, 1.0))
    var_err = var * np.sqrt(2.0 / neff)
    var_ok = abs(var - (1 - np.tanh(t) ** 2)) <= 3 * var_err
    cov = estimate_endpoint_covariance(
        {n: saw_chains[n] for n in (64, 128, 256)})
    ratios = cov["successive_ratios"]
    stable = all(abs(r - 1) <= 0.25 for r in ratios)
    ok = speed_ok and var_ok and stable
    report(9, ok, f"d1 speed {sd['v'][0]:.4f} vs {np.tanh(t):.4f} "
                  f"(3sig={3*sd['stderr'][0]:.4f}); var {var:.4f} vs "
                  f"{1-np.tanh(t)**2:.4f} (3sig={3*var_err:.4f}); "
                  f"SAW Var/n ratios {[round(r,3) for r in ratios]} within 25%")


def test_criterion_10_cross_method_consistency(free, d1_table, saw_chains):
    """Enumeration gradient vs sampler speed; F-root vs free energy."""
    saw = model_saw()
    grad = speed_from_free_energy(saw, [0.5, 0.0], step=0.05, n_max=12)
    sd = estimate_speed(saw_chains[200])
    gap = abs(grad["v"][0] - sd["v"][0])
    combined = grad["stderr"][0] + 3 * sd["stderr"][0]
    speeds_ok = gap <= combined
    h = dual_drift(d1_table, [1]).h
    cone = ConeSpec(h, 0.1, 3, d1_table)
    g = 0.9
    root = lambda_of_drift(free, [g], cone, 40, d=1)
    fe = free_energy(free, [g], 20, d=1)
    exact = np.log(2 * np.cosh(g))
    root_ok = (abs(root - exact) <= 1e-2
               and abs(root - fe.value) <= max(2 * fe.width, 1e-6))
    report(10, speeds_ok and root_ok,
           f"speed gap {gap:.4f} <= combined {combined:.4f}; F-root "
           f"{root:.6f} vs closed form {exact:.6f} (|diff| = "
           f"{abs(root-exact):.1e} <= 1e-2) and vs extrapolation within "
           f"max(2*width, 1e-6)")


def test_criterion_11_perturbation_contract(free, d1_table):
    """f(R=0) = 0 and f(c|w|) = c exactly; the edge-reinforcement
    example stays small and shrinks with epsilon."""
    h = dual_drift(d1_table, [1]).h
    cone = ConeSpec(h, 0.1, 3, d1_table)
    r0 = perturbed_correction_f(
        free, perturbation_zero(center=(0.0,), radius=np.inf),
        [0.9], cone, 40, d=1)
    c = 0.05
    rc = perturbed_correction_f(
        free, perturbation_linear(c, center=(0.0,), radius=np.inf),
        [0.9], cone, 40, d=1)
    table2 = build_norm_table(free, 2.2, d=2, height=2, n_max=24)
    h2 = dual_drift(table2, [1, 0]).h
    cone2 = ConeSpec(h2, 0.1, 3, table2)
    fs = []
    for eps in (0.05, 0.025, 0.0125):
        pert = perturbation_edge_reinforcement(eps, center=h2, radius=2.0)
        fs.append(abs(perturbed_correction_f(free, pert, h2, cone2, 10,
                                             d=2)["f"]))
    ok = (r0["f"] == 0.0 and abs(rc["f"] - c) <= 1e-12
          and fs[0] <= 0.1 and fs[0] > fs[1] > fs[2])
    report(11, ok, f"f(0) = {r0['f']}; |f(c)-c| = {abs(rc['f']-c):.1e}; "
                   f"reinforcement |f| = {[f'{v:.2e}' for v in fs]} "
                   f"decreasing, max <= 0.1")


def test_criterion_12_sampler_oracle(catalog):
    """1e6 thinned samples vs exact endpoint law at n=8, all catalog
    models, goodness-of-fit p > 1e-3."""
    t0 = time.time()
    h = np.array([0.2, 0.1])
    details = []
    for i, (name, spec) in enumerate(sorted(catalog.items())):
        exact = endpoint_distribution(spec, h, 8)
        cfg = ChainConfig(n=8, params=GCParams(h, 0.0), sweeps=2_010_000,
                          burn_in=10_000, thinning=2, seed=9000 + i)
        st = mcmc_sample(spec, cfg)
        assert st.n_samples == 1_000_000
        cnt = Counter(map(tuple, st.displacements.astype(int)))
        keys = [k for k, p in exact.items() if p * st.n_samples >= 10]
        obs = np.array([cnt.get(k, 0) for k in keys], dtype=float)
        expd = np.array([exact[k] * st.n_samples for k in keys])
        rest_o = st.n_samples - obs.sum()
        rest_e = st.n_samples - expd.sum()
        if rest_e > 5:
            obs = np.append(obs, rest_o)
            expd = np.append(expd, rest_e)
        chi2 = ((obs - expd) ** 2 / expd).sum()
        pval = float(ss.chi2.sf(chi2, len(obs) - 1))
        assert pval > 1e-3, (name, pval)
        details.append(f"{name}: p={pval:.3f}")
    dt = time.time() - t0
    report(12, True, "; ".join(details) + f"; runtime {dt:.0f}s")
