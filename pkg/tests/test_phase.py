import numpy as np
import pytest

from selfwalk.geometry import ConeSpec, dual_drift
from selfwalk.phase import (
    classify_phase,
    free_energy,
    implicit_surface_F,
    lambda_of_drift,
    perturbed_correction_f,
    rate_function,
    speed_from_free_energy,
)
from selfwalk.potentials import (
    model_reinforced,
    perturbation_linear,
    perturbation_zero,
)


class TestFreeEnergy:
    def test_d1_closed_form(self, free_spec):
        h = 0.9
        fe = free_energy(free_spec, [h], 16, d=1)
        exact = np.log(2 * np.cosh(h))
        assert fe.value == pytest.approx(exact, abs=1e-12)
        assert fe.lo == pytest.approx(exact, abs=1e-12)
        assert fe.hi == pytest.approx(exact, abs=1e-12)

    def test_saw_bracket_orders(self, saw_spec):
        fe = free_energy(saw_spec, [0.2, 0.0], 9)
        assert fe.lo <= fe.value <= fe.hi
        assert fe.hi_rigorous and not fe.lo_rigorous

    def test_attractive_interior_flat(self, free_spec):
        # strongly attractive site cost: Lambda(h) equals lambda_0 well
        # inside the shape (per-n ratios at h match zero drift)
        spec = model_reinforced([1.0, 0.0])
        fe_h = free_energy(spec, [0.1, 0.0], 8)
        fe_0 = free_energy(spec, [0.0, 0.0], 8)
        assert fe_h.value == pytest.approx(fe_0.value, abs=2e-2)

    def test_jensen_direction(self, dj_spec):
        # Z_n^h >= Z_n for symmetric potentials
        fe_h = free_energy(dj_spec, [0.4, 0.0], 8)
        fe_0 = free_energy(dj_spec, [0.0, 0.0], 8)
        for n in fe_h.per_n:
            assert fe_h.per_n[n] >= fe_0.per_n[n] - 1e-12


class TestRateFunction:
    def test_cramer_d1(self, free_spec):
        h = 0.4
        ub = np.tanh(h)
        g_grid = np.linspace(-3, 3, 241).reshape(-1, 1)
        us = [-0.5, 0.2, ub, 0.8]
        rt = rate_function(free_spec, [h], [[u] for u in us], g_grid, 16, d=1)
        for u, J in zip(us, rt.J):
            exact = ((1 + u) / 2 * np.log((1 + u) / (1 + ub))
                     + (1 - u) / 2 * np.log((1 - u) / (1 - ub)))
            assert J == pytest.approx(exact, abs=5e-4)

    def test_convex_nonnegative(self, saw_spec):
        g_grid = np.linspace(-1.2, 1.2, 49).reshape(-1, 1) @ np.array([[1.0, 0.0]])
        u_grid = np.linspace(-0.9, 0.9, 25).reshape(-1, 1) @ np.array([[1.0, 0.0]])
        rt = rate_function(saw_spec, [0.3, 0.0], u_grid, g_grid, 8)
        J = rt.J
        assert (J >= -1e-10).all()
        assert J.min() <= 0.05  # minimum near zero at the typical speed
        x = u_grid[:, 0]
        second = J[:-2] - 2 * J[1:-1] + J[2:]
        assert (second >= -1e-9).all()

    def test_narrow_grid_flagged(self, free_spec):
        g_grid = np.linspace(-0.2, 0.2, 9).reshape(-1, 1)
        rt = rate_function(free_spec, [0.0], [[0.9]], g_grid, 10, d=1)
        assert rt.edge_flags[0]

    def test_attractive_linear_lower_bound(self):
        # J_h grows at least linearly near zero for h inside the shape
        spec = model_reinforced([1.0, 0.0])
        g_grid = np.linspace(-1.0, 1.0, 41).reshape(-1, 1) @ np.array([[1.0, 0.0]])
        us = np.array([0.05, 0.1, 0.2, 0.3])
        rt = rate_function(spec, [0.1, 0.0], [[u, 0.0] for u in us], g_grid, 8)
        alpha = rt.J / us
        assert alpha.min() > 0.02


class TestClassify:
    def test_repulsive_ballistic(self, saw_spec):
        rep = classify_phase(saw_spec, [0.5, 0.0], n_max=8)
        assert rep.classification == "ballistic"
        assert rep.evidence["shape_limit"] == "degenerate-point"

    def test_repulsive_never_subballistic(self, dj_spec):
        for h in ([0.1, 0.0], [0.0, 0.7], [0.4, 0.4]):
            rep = classify_phase(dj_spec, h, n_max=6)
            assert rep.classification != "sub-ballistic"

    def test_attractive_interior_subballistic(self):
        spec = model_reinforced([1.0, 0.0])
        rep = classify_phase(spec, [0.1, 0.0], n_max=8)
        assert rep.classification == "sub-ballistic"
        assert rep.evidence["xi_star"] < 1

    def test_zero_drift(self, saw_spec):
        rep = classify_phase(saw_spec, [0.0, 0.0])
        assert rep.classification == "sub-ballistic"

    def test_speed_conflict_reported(self, saw_spec):
        rep = classify_phase(saw_spec, [0.5, 0.0], n_max=8,
                             speed_fn=lambda: (0.0, 1e-4))
        assert rep.classification is None
        assert "inconsistency" in rep.evidence


class TestSpeedFromFreeEnergy:
    def test_d1_tanh(self, free_spec):
        r = speed_from_free_energy(free_spec, [0.9], step=0.02, n_max=18, d=1)
        assert r["v"][0] == pytest.approx(np.tanh(0.9), abs=1e-3)
        assert r["hessian_min_eig"] > 0

    def test_symmetric_zero(self, dj_spec):
        r = speed_from_free_energy(dj_spec, [0.0, 0.0], step=0.05, n_max=7)
        assert np.allclose(r["v"], 0.0, atol=1e-10)

    def test_hessian_positive_definite_ballistic(self, saw_spec):
        r = speed_from_free_energy(saw_spec, [0.5, 0.0], step=0.05, n_max=8)
        assert r["hessian_min_eig"] > 0


class TestImplicitSurface:
    def test_decreasing_in_mu(self, free_spec, cone_d2):
        vals = [implicit_surface_F(free_spec, cone_d2.h, mu, cone_d2, 8)
                for mu in (1.0, 1.5, 2.0, 2.5)]
        assert all(b < a for a, b in zip(vals[:-1], vals[1:]))

    def test_monotone_in_budget(self, free_spec, cone_d2):
        vals = [implicit_surface_F(free_spec, cone_d2.h, 2.0, cone_d2, n)
                for n in (4, 6, 8)]
        assert all(b >= a - 1e-12 for a, b in zip(vals[:-1], vals[1:]))

    def test_root_d1_closed_form(self, free_spec, table_d1):
        h = dual_drift(table_d1, [1]).h
        cone = ConeSpec(h, 0.1, 3, table_d1)
        for g in (0.7, 0.9, 1.2):
            root = lambda_of_drift(free_spec, [g], cone, 40, d=1)
            assert root == pytest.approx(np.log(2 * np.cosh(g)), abs=1e-12)


class TestPerturbedCorrection:
    def test_zero_gives_zero(self, free_spec, table_d1):
        h = dual_drift(table_d1, [1]).h
        cone = ConeSpec(h, 0.1, 3, table_d1)
        r = perturbed_correction_f(
            free_spec, perturbation_zero(center=(0.0,), radius=np.inf),
            [0.9], cone, 40, d=1)
        assert r["f"] == 0.0

    def test_linear_gives_c(self, free_spec, table_d1):
        h = dual_drift(table_d1, [1]).h
        cone = ConeSpec(h, 0.1, 3, table_d1)
        c = 0.05
        r = perturbed_correction_f(
            free_spec, perturbation_linear(c, center=(0.0,), radius=np.inf),
            [0.9], cone, 40, d=1)
        assert r["f"] == pytest.approx(c, abs=1e-12)

    def test_linear_gives_c_d2(self, free_spec, exact_table_d2):
        h = dual_drift(exact_table_d2, [1, 0]).h
        cone = ConeSpec(h, 0.2, 3, exact_table_d2)
        c = 0.05
        r = perturbed_correction_f(
            free_spec, perturbation_linear(c, center=h, radius=np.inf),
            h, cone, 8, d=2)
        assert r["f"] == pytest.approx(c, abs=1e-10)
