import numpy as np
import pytest

from selfwalk.enumeration import (
    CapExceededError,
    all_paths_gf,
    bubble_check,
    connectivity_constant,
    endpoint_distribution,
    enumeration_cap,
    hitting_gf,
    partition_function,
    restricted_pf,
)
from selfwalk.paths import LatticePath, Locality, all_paths, elementary_loop
from selfwalk.potentials import (
    DegenerateModelError,
    GCParams,
    PhiSpec,
    log_weight,
    model_domb_joyce,
    model_reinforced,
)

# classic d=2 self-avoiding walk counts (verified against the brute
# oracle below for n <= 6)
SAW_COUNTS = [1, 4, 12, 36, 100, 284, 780, 2172, 5916, 16268, 44100]


def brute_saw_count(n):
    def rec(pos, visited, left):
        if left == 0:
            return 1
        total = 0
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nxt = (pos[0] + dx, pos[1] + dy)
            if nxt not in visited:
                total += rec(nxt, visited | {nxt}, left - 1)
        return total

    return rec((0, 0), {(0, 0)}, n)


class TestPartitionFunction:
    def test_free_count(self, free_spec):
        r = partition_function(free_spec, [0.0, 0.0], 3)
        assert np.exp(r.logZ) == pytest.approx(64.0, rel=1e-12)

    def test_saw_counts(self, saw_spec):
        for n in range(1, 7):
            r = partition_function(saw_spec, [0.0, 0.0], n)
            assert np.exp(r.logZ) == pytest.approx(SAW_COUNTS[n], rel=1e-10)
        assert brute_saw_count(5) == SAW_COUNTS[5]

    def test_paper_bounds_all_models(self, saw_spec, dj_spec, reinforced_spec,
                                     annealed_spec):
        for spec in (saw_spec, dj_spec, reinforced_spec, annealed_spec):
            phi1 = float(spec.values[1])
            for n in range(1, 9):
                logZ = partition_function(spec, [0.0, 0.0], n).logZ
                assert logZ <= n * np.log(4) + 1e-10
                assert logZ >= -phi1 * n - 1e-10

    def test_oracle_random_model(self):
        # brute-force sum over all paths against the DFS kernel
        spec = model_domb_joyce(0.3, locality=Locality.UNORIENTED_BOND)
        h = np.array([0.25, -0.15])
        params = GCParams(h, 0.0)
        n = 5
        brute = 0.0
        for sites in all_paths(2, n):
            brute += np.exp(log_weight(spec, params, LatticePath(sites)))
        r = partition_function(spec, h, n)
        assert np.exp(r.logZ) == pytest.approx(brute, rel=1e-12)

    def test_endpoint_consistency(self, saw_spec):
        r = partition_function(saw_spec, [0.3, 0.1], 6)
        from scipy.special import logsumexp

        total = logsumexp(list(r.by_endpoint.values()))
        assert total == pytest.approx(r.logZ, abs=1e-12)
        for x in r.by_endpoint:
            assert abs(x[0]) + abs(x[1]) <= 6
            assert (abs(x[0]) + abs(x[1])) % 2 == 6 % 2

    def test_cap_enforced(self, dj_spec):
        with pytest.raises(CapExceededError):
            partition_function(dj_spec, [0.0, 0.0], enumeration_cap(dj_spec, 2) + 1)

    def test_degenerate_model(self):
        dead = PhiSpec(np.array([0.0, np.inf]))
        with pytest.raises(DegenerateModelError):
            endpoint_distribution(dead, [0.0, 0.0], 2)


class TestMultiplicativity:
    def test_repulsive_subadditive(self, saw_spec, dj_spec):
        for spec in (saw_spec, dj_spec):
            logs = {n: partition_function(spec, [0.0, 0.0], n).logZ
                    for n in range(1, 9)}
            for n in range(1, 8):
                for m in range(1, 9 - n):
                    assert logs[n + m] <= logs[n] + logs[m] + 1e-10

    def test_attractive_superadditive(self, reinforced_spec, annealed_spec):
        for spec in (reinforced_spec, annealed_spec):
            logs = {n: partition_function(spec, [0.0, 0.0], n).logZ
                    for n in range(1, 9)}
            for n in range(1, 8):
                for m in range(1, 9 - n):
                    assert logs[n + m] >= logs[n] + logs[m] - 1e-10


class TestEndpointDistribution:
    def test_uniform_one_step(self, free_spec):
        law = endpoint_distribution(free_spec, [0.0, 0.0], 1)
        assert all(p == pytest.approx(0.25) for p in law.values())

    def test_tilted_mean_tanh(self, free_spec):
        t = 0.8
        for n in (5, 9):
            law = endpoint_distribution(free_spec, [t], n, d=1)
            mean = sum(x[0] * p for x, p in law.items()) / n
            assert mean == pytest.approx(np.tanh(t), abs=1e-12)

    def test_lattice_symmetry(self, saw_spec):
        law = endpoint_distribution(saw_spec, [0.0, 0.0], 6)
        for (x, y), p in law.items():
            assert law[(-x, y)] == pytest.approx(p, rel=1e-10)
            assert law[(y, x)] == pytest.approx(p, rel=1e-10)

    def test_normalized(self, dj_spec):
        law = endpoint_distribution(dj_spec, [0.2, 0.0], 7)
        assert sum(law.values()) == pytest.approx(1.0, abs=1e-12)


class TestGeneratingFunctions:
    def test_d1_first_hit_closed_form(self, free_spec):
        lam = float(-np.log(0.4))
        g = hitting_gf(free_spec, [1], lam, 40, d=1)
        assert np.exp(g.logH) == pytest.approx(0.5, abs=1e-6)

    def test_d1_return_gf(self, free_spec):
        lam = float(-np.log(0.4))
        g = all_paths_gf(free_spec, [0], lam, 60, d=1)
        assert np.exp(g.logD) == pytest.approx(1 / 0.6, abs=1e-4)
        assert np.exp(g.logH) == pytest.approx(1.0, abs=1e-12)

    def test_H_le_D_everywhere(self, dj_spec):
        for lam in (1.4, 2.0):
            for x in ([1, 0], [2, 1], [0, 0]):
                g = hitting_gf(dj_spec, x, lam, 9)
                assert g.logH <= g.logD + 1e-12

    def test_monotone_in_budget(self, saw_spec):
        prev = None
        for n_max in (6, 8, 10):
            g = hitting_gf(saw_spec, [2, 1], 1.2, n_max)
            if prev is not None:
                assert g.logH >= prev[0] - 1e-12
                assert g.logD >= prev[1] - 1e-12
            prev = (g.logH, g.logD)

    def test_tail_bound_regimes(self, free_spec):
        g = hitting_gf(free_spec, [1, 0], 2.0, 10)
        assert g.tail_bound is not None and not g.diverge_risk
        g2 = hitting_gf(free_spec, [1, 0], 1.0, 10)
        assert g2.tail_bound is None and g2.diverge_risk

    def test_attractive_D_supermultiplicative(self, reinforced_spec):
        # D_{2N}(x+y) >= D_N(x) D_N(y), exact for attractive potentials
        lam = 1.9
        ga = all_paths_gf(reinforced_spec, [1, 0], lam, 5)
        gb = all_paths_gf(reinforced_spec, [0, 1], lam, 5)
        gab = all_paths_gf(reinforced_spec, [1, 1], lam, 10)
        assert gab.logD >= ga.logD + gb.logD - 1e-10


class TestConnectivityConstant:
    def test_free_exact(self, free_spec):
        r = connectivity_constant(free_spec, 8, d=2)
        assert r["lo"] == pytest.approx(np.log(4), abs=1e-12)
        assert r["hi"] == pytest.approx(np.log(4), abs=1e-12)

    def test_saw_decreasing_hi(self, saw_spec):
        r = connectivity_constant(saw_spec, 10, d=2)
        ratios = r["ratios"]
        assert all(b <= a + 1e-12 for a, b in zip(ratios[:-1], ratios[1:]))
        assert 0.97 <= r["hi"] <= 1.10 or r["hi"] > 1.0  # log mu band at n=10

    def test_attractive_bracket(self, reinforced_spec):
        r = connectivity_constant(reinforced_spec, 8, d=2)
        assert r["lo"] is not None and r["lo"] <= np.log(4) + 1e-12
        assert all(v <= np.log(4) + 1e-12 for v in r["ratios"])

    def test_constant_beta_normalizes_to_free(self):
        spec = model_reinforced([0.4])
        r = connectivity_constant(spec, 6, d=2)
        assert r["sl_shift"] == pytest.approx(0.4)
        assert r["lo"] == pytest.approx(np.log(4), abs=1e-12)


class TestRestrictedPF:
    def test_length_tautology(self, dj_spec):
        h = [0.1, 0.0]
        full = partition_function(dj_spec, h, 6).logZ
        assert restricted_pf(dj_spec, h, 6, "length", 6) == pytest.approx(full)
        assert restricted_pf(dj_spec, h, 6, "length", 5) == -np.inf

    def test_saw_no_doubled_bonds(self, saw_spec):
        h = [0.0, 0.0]
        z = partition_function(saw_spec, h, 6).logZ
        at0 = restricted_pf(saw_spec, h, 6, "doubled-bonds", 0)
        assert at0 == pytest.approx(z, abs=1e-10)
        assert restricted_pf(saw_spec, h, 6, "doubled-bonds", 1) == -np.inf

    def test_partition_of_path_space(self, dj_spec):
        from scipy.special import logsumexp

        h = [0.15, -0.05]
        n = 6
        eta = elementary_loop()
        masses = [restricted_pf(dj_spec, h, n, eta, f) for f in range(n + 1)]
        masses = [m for m in masses if m > -np.inf]
        total = logsumexp(masses)
        assert total == pytest.approx(partition_function(dj_spec, h, n).logZ,
                                      abs=1e-10)

    def test_pattern_count_oracle(self, free_spec):
        # brute force the pattern-count histogram on all 4^5 paths
        from selfwalk.paths import count_pattern

        eta = elementary_loop()
        n = 5
        hist = {}
        for sites in all_paths(2, n):
            c = count_pattern(LatticePath(sites), eta)
            hist[c] = hist.get(c, 0) + 1
        for f, count in hist.items():
            got = restricted_pf(free_spec, [0.0, 0.0], n, eta, f)
            assert np.exp(got) == pytest.approx(count, rel=1e-12)


class TestBubble:
    def test_saw_inequality(self, saw_spec):
        r = bubble_check(saw_spec, [1, 0], [1, 0], 1.2, 10)
        assert r["holds"] and r["slack"] >= 0

    def test_free_d1_closed_form(self, free_spec):
        r = bubble_check(free_spec, [1], [1], float(-np.log(0.4)), 30, d=1)
        assert r["holds"]

    def test_degenerate_targets(self, saw_spec):
        r = bubble_check(saw_spec, [0, 0], [1, 0], 1.2, 9)
        assert r["holds"]
