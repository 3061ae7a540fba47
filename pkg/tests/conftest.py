import numpy as np
import pytest

from selfwalk import geometry, potentials


@pytest.fixture(scope="session")
def free_spec():
    return potentials.model_free()


@pytest.fixture(scope="session")
def saw_spec():
    return potentials.model_saw()


@pytest.fixture(scope="session")
def dj_spec():
    return potentials.model_domb_joyce(0.5)


@pytest.fixture(scope="session")
def reinforced_spec():
    return potentials.model_reinforced([0.02, 0.01, 0.005, 0.0])


@pytest.fixture(scope="session")
def annealed_spec():
    return potentials.model_annealed({"kind": "exponential", "rate": 50.0})


@pytest.fixture(scope="session")
def table_d1(free_spec):
    lam = float(-np.log(0.4))
    return geometry.build_norm_table(free_spec, lam, d=1, height=1, n_max=64)


@pytest.fixture(scope="session")
def table_d2(free_spec):
    return geometry.build_norm_table(free_spec, np.log(4) + 0.6, d=2, height=1, n_max=12)


@pytest.fixture(scope="session")
def cone_d2(table_d2):
    h = geometry.dual_drift(table_d2, [1, 0]).h
    return geometry.ConeSpec(h, 0.1, 3, table_d2)


def random_paths(d, n, count, seed=0):
    from selfwalk.paths import LatticePath, step_vectors

    rng = np.random.default_rng(seed)
    steps = step_vectors(d)
    out = []
    for _ in range(count):
        sv = steps[rng.integers(0, 2 * d, size=n)]
        out.append(LatticePath(np.vstack([np.zeros(d, int), np.cumsum(sv, axis=0)])))
    return out


def exact_free_xi_d2(lam: float, x) -> float:
    """Decay-rate oracle for the non-interacting d=2 walk.

    By convex duality the rate along x is the support function of the
    level set {k : 2 cosh k1 + 2 cosh k2 = e^lam}, computed here by
    one-dimensional optimization -- independent of the enumeration path
    it is used to check.
    """
    from scipy.optimize import minimize_scalar

    budget = np.exp(lam)
    kmax = float(np.arccosh((budget - 2) / 2))

    def neg(k1):
        c2 = (budget - 2 * np.cosh(k1)) / 2
        if c2 < 1.0:
            return 1e9
        return -(abs(x[0]) * k1 + abs(x[1]) * np.arccosh(c2))

    r = minimize_scalar(neg, bounds=(0.0, kmax), method="bounded",
                        options={"xatol": 1e-12})
    return float(-r.fun)


@pytest.fixture(scope="session")
def exact_table_d2():
    """Free-walk norm table from the closed-form rate (no estimation)."""
    lam = 2.0
    dirs = geometry.coprime_directions(2, 2)
    xi = np.array([exact_free_xi_d2(lam, x) for x in dirs])
    return geometry.NormTable(lam, dirs, xi, np.zeros(len(dirs)),
                              {"model": "free", "exact": True})
