"""Runtime invariant suite behind the ``check`` subcommand.

Each check is fast and self-contained; the CLI maps any failure to exit
code 1.  The suite covers the structural identities that hold exactly
(round trips, local-time accounting, monotonicity, weight identities)
plus closed-form oracles for the interaction-free walk.
"""

from __future__ import annotations

import numpy as np

from . import coarse, enumeration, geometry, potentials, sampler
from .paths import LatticePath, Locality
from .potentials import GCParams, log_weight


def _random_paths(d, n, count, seed=0):
    rng = np.random.default_rng(seed)
    from .paths import step_vectors

    steps = step_vectors(d)
    out = []
    for _ in range(count):
        sv = steps[rng.integers(0, 2 * d, size=n)]
        out.append(LatticePath(np.vstack([np.zeros(d, int), np.cumsum(sv, axis=0)])))
    return out


def check_local_time_sums(spec, d=2) -> dict:
    from .paths import local_times

    for path in _random_paths(d, 20, 25, seed=1):
        st = sum(local_times(path, Locality.SITE).values())
        ub = sum(local_times(path, Locality.UNORIENTED_BOND).values())
        ob = sum(local_times(path, Locality.ORIENTED_BOND).values())
        if st != path.n_steps + 1 or ub != path.n_steps or ob != path.n_steps:
            return {"ok": False, "detail": "local time sums broken"}
    return {"ok": True}


def check_free_closed_forms(spec=None, d=None) -> dict:
    free = potentials.model_free()
    r = enumeration.partition_function(free, [0.0, 0.0], 5)
    if abs(np.exp(r.logZ) - 4**5) > 1e-6:
        return {"ok": False, "detail": f"free Z_5 = {np.exp(r.logZ)}"}
    lam = float(-np.log(0.4))
    g = enumeration.hitting_gf(free, [1], lam, 40, d=1)
    if abs(np.exp(g.logH) - 0.5) > 1e-5:
        return {"ok": False, "detail": f"free H(1) = {np.exp(g.logH)}"}
    return {"ok": True}


def check_multiplicativity(spec, d=2, n_tot=8) -> dict:
    cls = potentials.classify(spec, min(40, spec.l_max))
    logs = {}
    for n in range(1, n_tot + 1):
        logs[n] = enumeration.partition_function(spec, np.zeros(d), n, d).logZ
    for n in range(1, n_tot):
        for m in range(1, n_tot - n + 1):
            gap = logs[n + m] - logs[n] - logs[m]
            if cls["R"] and gap > 1e-10:
                return {"ok": False, "detail": f"subadditivity broken at {n}+{m}: {gap}"}
            if cls["A"] and gap < -1e-10:
                return {"ok": False, "detail": f"superadditivity broken at {n}+{m}: {gap}"}
    return {"ok": True}


def check_gf_order(spec, d=2, lam=2.0) -> dict:
    cap = enumeration.enumeration_cap(spec, d)
    n_max = min(cap, 10)
    prev_h = prev_d = None
    for budget in (n_max - 2, n_max):
        g = enumeration.hitting_gf(spec, [1] + [0] * (d - 1), lam, budget, d)
        if g.logH > g.logD + 1e-12:
            return {"ok": False, "detail": "H > D"}
        if prev_h is not None and (g.logH < prev_h - 1e-12 or g.logD < prev_d - 1e-12):
            return {"ok": False, "detail": "GF not monotone in budget"}
        prev_h, prev_d = g.logH, g.logD
    return {"ok": True}


def check_skeleton_p1p2(spec, table, K=3.0, d=2, n=60, count=200) -> dict:
    for attractive in (False, True):
        build = coarse.skeleton_attractive if attractive else coarse.skeleton_repulsive
        for path in _random_paths(d, n, count // 2, seed=3):
            sk = build(path, K, table)
            rep = coarse.verify_p1_p2(path, sk, K, table)
            if not rep["ok"]:
                return {"ok": False, "detail": f"P1/P2 violations: {rep['violations'][:3]}"}
    return {"ok": True}


def check_decomposition(spec, table, d=2) -> dict:
    h = geometry.dual_drift(table, [1] + [0] * (d - 1)).h
    cone = geometry.ConeSpec(h, 0.1, 3, table)
    params = GCParams(h, table.lam)
    bond_spec = potentials.model_saw(locality=Locality.UNORIENTED_BOND)
    for path in _random_paths(d, 10, 120, seed=5):
        dec = coarse.irreducible_decompose(path, cone)
        if not np.array_equal(dec.reassemble().sites, path.sites):
            return {"ok": False, "detail": "round trip broken"}
        res = coarse.piece_weight_identity(bond_spec, dec, params)
        if res is not None and abs(res) > 1e-10:
            return {"ok": False, "detail": f"bond residual {res}"}
    return {"ok": True}


def check_q_mass_monotone(spec, table, d=2) -> dict:
    h = geometry.dual_drift(table, [1] + [0] * (d - 1)).h
    cone = geometry.ConeSpec(h, 0.1, 3, table)
    n_max = min(8, enumeration.enumeration_cap(spec, d))
    r = coarse.q_measure_mass(spec, h, table.lam, n_max, cone, d)
    if not r["monotone"]:
        return {"ok": False, "detail": "q-mass not monotone"}
    return {"ok": True}


def check_detailed_balance(spec, d=2) -> dict:
    """Metropolis identity on a frozen kink pair: the flow ratio must
    equal the weight ratio exactly."""
    a = LatticePath(np.array([[0, 0], [1, 0], [1, 1], [2, 1]]))
    b = LatticePath(np.array([[0, 0], [1, 0], [2, 0], [2, 1]]))
    params = GCParams(np.array([0.3, 0.1]), 0.0)
    wa = log_weight(spec, params, a)
    wb = log_weight(spec, params, b)
    if wa == -np.inf or wb == -np.inf:
        return {"ok": True, "detail": "pair rejected by hard core; vacuous"}
    r = np.exp(wb - wa)
    alpha_ab = min(1.0, r)
    alpha_ba = min(1.0, 1.0 / r)
    if abs(alpha_ab / alpha_ba - r) > 1e-12:
        return {"ok": False, "detail": "flow ratio != weight ratio"}
    return {"ok": True}


def check_chain_reproducibility(spec, d=2) -> dict:
    cfg = sampler.ChainConfig(
        n=10, params=GCParams(np.zeros(d), 0.0), sweeps=300, burn_in=50,
        thinning=2, seed=11,
    )
    s1 = sampler.mcmc_sample(spec, cfg)
    s2 = sampler.mcmc_sample(spec, cfg)
    same = np.array_equal(s1.displacements, s2.displacements)
    return {"ok": bool(same), "detail": None if same else "chains diverged"}


def run_all(spec, d: int = 2, lam: float | None = None) -> list:
    """Run every check against one model; returns (name, ok, detail) rows."""
    if lam is None:
        lam = float(np.log(2 * d) + 0.6)
    free = potentials.model_free()
    table = geometry.build_norm_table(free, lam, d=d, height=1, n_max=12)
    suite = [
        ("local-time-sums", check_local_time_sums, (spec, d)),
        ("free-closed-forms", check_free_closed_forms, ()),
        ("multiplicativity", check_multiplicativity, (spec, d)),
        ("gf-order", check_gf_order, (spec, d)),
        ("skeleton-p1p2", check_skeleton_p1p2, (spec, table, 3.0, d)),
        ("decomposition", check_decomposition, (spec, table, d)),
        ("q-mass-monotone", check_q_mass_monotone, (spec, table, d)),
        ("detailed-balance", check_detailed_balance, (spec, d)),
        ("chain-reproducibility", check_chain_reproducibility, (spec, d)),
    ]
    rows = []
    for name, fn, args in suite:
        try:
            res = fn(*args)
        except Exception as exc:  # a crash is a failure, not an abort
            res = {"ok": False, "detail": f"{type(exc).__name__}: {exc}"}
        rows.append({"name": name, "ok": bool(res["ok"]),
                     "detail": res.get("detail")})
    return rows
