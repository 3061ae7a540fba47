"""Free energy, rate functions and the ballistic phase diagram.

Lambda(h) = lim (1/n) log Z_n^h is estimated from the per-n enumeration
series with Fekete brackets (one rigorous edge per interaction class)
and an affine-in-1/n extrapolation.  The Legendre transform of its
local increments gives the large-deviation rate of the displacement per
step; the irreducible-piece generating function supplies the implicit
surface F(g, mu) = 0 whose root in mu recovers Lambda(g) at boundary
drifts, and the perturbed free-energy correction f(g) solves the
tilted-moment equation over the same pieces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from . import _kernels
from .coarse import enumerate_irreducible, _site_correction
from .enumeration import partition_function
from .geometry import ConeSpec, k_lambda0, polar_norm
from .paths import LatticePath, step_vectors
from .potentials import PerturbationSpec, PhiSpec, classify, perturbation_R

__all__ = [
    "FreeEnergyEstimate",
    "RateFunctionTable",
    "PhaseReport",
    "free_energy",
    "rate_function",
    "classify_phase",
    "speed_from_free_energy",
    "implicit_surface_F",
    "lambda_of_drift",
    "perturbed_correction_f",
]


@dataclass(frozen=True)
class FreeEnergyEstimate:
    """Per-n series with Fekete bracket and 1/n extrapolation."""

    h: tuple
    per_n: dict
    lo: float
    hi: float
    lo_rigorous: bool
    hi_rigorous: bool
    value: float
    method: str
    model: str

    @property
    def width(self) -> float:
        return self.hi - self.lo


def free_energy(spec: PhiSpec, h, n_max: int, d: int | None = None,
                cap: int | None = None) -> FreeEnergyEstimate:
    """Estimate Lambda(h) from log Z_n^h, n <= n_max.

    Repulsive ratios decrease (min is a rigorous upper edge), attractive
    ratios increase (max is a rigorous lower edge); the opposite edge is
    the extrapolation mirrored about the value, flagged non-rigorous.
    """
    h = np.atleast_1d(np.asarray(h, dtype=np.float64))
    d = d if d is not None else len(h)
    ratios = {}
    for n in range(1, n_max + 1):
        ratios[n] = partition_function(spec, h, n, d, cap).logZ / n
    vals = np.array([ratios[n] for n in sorted(ratios)])
    ns = np.arange(1, n_max + 1)
    top = ns >= max(2, n_max // 2)
    X = np.stack([np.ones(top.sum()), 1.0 / ns[top]], axis=1)
    coef, *_ = np.linalg.lstsq(X, vals[top], rcond=None)
    value = float(coef[0])
    cls = classify(spec, min(50, spec.l_max))
    lo = hi = None
    lo_rig = hi_rig = False
    if cls["R"]:
        hi = float(vals.min())
        hi_rig = True
    if cls["A"]:
        lo = float(vals.max())
        lo_rig = True
    if hi is None:
        hi = value + max(0.0, value - (lo if lo is not None else value))
    if lo is None:
        lo = value - max(0.0, hi - value)
    value = float(np.clip(value, lo, hi))
    method = "enumeration+Fekete" if (lo_rig or hi_rig) else "enumeration"
    return FreeEnergyEstimate(
        tuple(h), ratios, lo, hi, lo_rig, hi_rig, value, method, spec.name
    )


@dataclass(frozen=True)
class RateFunctionTable:
    """Discrete Legendre transform J_h on a velocity grid."""

    h: tuple
    u_grid: np.ndarray
    J: np.ndarray
    argmax_g: np.ndarray
    edge_flags: np.ndarray

    def min_value(self) -> float:
        return float(self.J.min())


def rate_function(spec: PhiSpec, h, u_grid, g_grid, n_max: int,
                  d: int | None = None) -> RateFunctionTable:
    """J_h(u) = sup_g [(g, u) - Lambda_h(g)] over the supplied g-grid.

    The discrete sup of affine functions is convex by construction.
    Entries whose argmax sits on the g-grid boundary are flagged: the
    grid is too narrow to bracket the supremum there.
    """
    h = np.atleast_1d(np.asarray(h, dtype=np.float64))
    d = d if d is not None else len(h)
    u_grid = np.atleast_2d(np.asarray(u_grid, dtype=np.float64))
    g_grid = np.atleast_2d(np.asarray(g_grid, dtype=np.float64))
    lam_h = free_energy(spec, h, n_max, d).value
    lam_vals = np.array([
        free_energy(spec, h + g, n_max, d).value - lam_h for g in g_grid
    ])
    hull = np.linalg.norm(g_grid, axis=1)
    edge_radius = hull.max() - 1e-12
    J = np.empty(len(u_grid))
    arg = np.empty((len(u_grid), g_grid.shape[1]))
    edge = np.zeros(len(u_grid), dtype=bool)
    for i, u in enumerate(u_grid):
        scores = g_grid @ u - lam_vals
        j = int(np.argmax(scores))
        J[i] = scores[j]
        arg[i] = g_grid[j]
        edge[i] = hull[j] >= edge_radius
    return RateFunctionTable(tuple(h), u_grid, J, arg, edge)


@dataclass(frozen=True)
class PhaseReport:
    h: tuple
    classification: str | None
    evidence: dict


def classify_phase(
    spec: PhiSpec,
    h,
    d: int | None = None,
    n_max: int | None = None,
    speed_fn=None,
    shape_tol: float = 5e-3,
) -> PhaseReport:
    """Ballistic / sub-ballistic / near-critical call for one drift.

    Repulsive interactions have a degenerate limit shape, so any
    non-zero drift is a ballistic candidate; attractive interactions
    are classified against the estimated limit shape.  A sampler speed
    (via ``speed_fn(n) -> (projection, stderr)``) corroborates; the
    boundary band is never classified further.  Conflicting evidence
    yields classification None with an inconsistency report.
    """
    h = np.atleast_1d(np.asarray(h, dtype=np.float64))
    d = d if d is not None else len(h)
    cls = classify(spec, min(50, spec.l_max))
    evidence: dict = {"potential_class": cls}
    hnorm = float(np.linalg.norm(h))
    band = 2 * shape_tol

    if hnorm == 0.0:
        return PhaseReport(tuple(h), "sub-ballistic",
                           {**evidence, "reason": "zero drift"})

    if cls["R"] and not cls["A"]:
        evidence["shape_limit"] = "degenerate-point"
        candidate = "ballistic"
        evidence["xi_star"] = float("inf")
    else:
        from .potentials import normalize_sl

        work, shift = normalize_sl(spec)
        lam0 = float(np.log(2 * d))
        scan = k_lambda0(work, [lam0 + 0.6, lam0 + 0.35, lam0 + 0.2], d=d,
                         n_max=n_max)
        evidence["shape_scan"] = {
            "lambdas": scan["lambdas"],
            "min_xi_per_unit": scan["min_xi_per_unit"],
            "classification": scan["classification"],
            "sl_shift": shift,
        }
        table = scan["tables"][scan["lambdas"][-1]]
        star = polar_norm(table, h)
        evidence["xi_star"] = star
        if abs(star - 1.0) <= band:
            return PhaseReport(tuple(h), "near-critical", evidence)
        candidate = "ballistic" if star > 1.0 else "sub-ballistic"

    if speed_fn is None:
        evidence["speed"] = None
        return PhaseReport(tuple(h), candidate, evidence)
    proj, err = speed_fn()
    evidence["speed"] = {"projection": proj, "stderr": err}
    ballistic_speed = proj > max(3 * err, 0.02)
    if candidate == "ballistic" and ballistic_speed:
        return PhaseReport(tuple(h), "ballistic", evidence)
    if candidate == "sub-ballistic" and not ballistic_speed:
        return PhaseReport(tuple(h), "sub-ballistic", evidence)
    evidence["inconsistency"] = (
        f"shape evidence says {candidate} but speed projection "
        f"{proj:.4f} +- {err:.4f} disagrees"
    )
    return PhaseReport(tuple(h), None, evidence)


def speed_from_free_energy(spec: PhiSpec, h, step: float = 0.05,
                           n_max: int | None = None, d: int | None = None) -> dict:
    """Central-difference gradient and Hessian of the free energy.

    The error bar differences the per-n ratio series directly (the 1/n
    surface term largely cancels between the two stencil points) and
    reports the spread over the top half of the series.
    """
    h = np.atleast_1d(np.asarray(h, dtype=np.float64))
    d = d if d is not None else len(h)
    if n_max is None:
        from .enumeration import enumeration_cap

        n_max = enumeration_cap(spec, d)
    basis = np.eye(d)

    def series(hh):
        return free_energy(spec, hh, n_max, d)

    grad = np.zeros(d)
    err = np.zeros(d)
    for i in range(d):
        fp = series(h + step * basis[i])
        fm = series(h - step * basis[i])
        grad[i] = (fp.value - fm.value) / (2 * step)
        ns = sorted(fp.per_n)
        top = [n for n in ns if n >= max(2, n_max // 2)]
        vals = [(fp.per_n[n] - fm.per_n[n]) / (2 * step) for n in top]
        err[i] = max(abs(v - grad[i]) for v in vals)
    hess = np.zeros((d, d))
    f0 = series(h).value
    for i in range(d):
        fp = series(h + step * basis[i]).value
        fm = series(h - step * basis[i]).value
        hess[i, i] = (fp - 2 * f0 + fm) / step**2
        for j in range(i + 1, d):
            fpp = series(h + step * (basis[i] + basis[j])).value
            fpm = series(h + step * (basis[i] - basis[j])).value
            fmp = series(h - step * (basis[i] - basis[j])).value
            fmm = series(h - step * (basis[i] + basis[j])).value
            hess[i, j] = hess[j, i] = (fpp - fpm - fmp + fmm) / (4 * step**2)
    eigmin = float(np.linalg.eigvalsh(hess).min())
    bracket = series(h)
    return {
        "v": grad,
        "stderr": err,
        "hessian": hess,
        "hessian_min_eig": eigmin,
        "underresolved": bool((bracket.width / (2 * step)) > max(np.abs(grad).max(), 1e-12)
                              and not (bracket.lo_rigorous and bracket.hi_rigorous)),
    }


def implicit_surface_F(spec: PhiSpec, g, mu: float, cone: ConeSpec,
                       n_max: int, d: int | None = None) -> float:
    """F(g, mu) = log sum over irreducible pieces of W(omega) e^{(g,D) - mu|omega|}.

    Strictly decreasing in mu; truncated at |omega| <= n_max with the
    per-budget sequence monotone increasing.
    """
    g = np.atleast_1d(np.asarray(g, dtype=np.float64))
    d = d if d is not None else len(g)
    QA, _ = enumerate_irreducible(spec, cone, n_max, d)
    side = int(round(QA.shape[1] ** (1.0 / d)))
    n_grid = (side - 1) // 2
    corr = _site_correction(spec)
    terms = []
    for k in range(1, n_max + 1):
        nz = np.flatnonzero(QA[k])
        if len(nz) == 0:
            continue
        coords = _kernels.decode_sites(nz, d, n_grid)
        terms.append(np.log(QA[k][nz]) + coords @ g + corr - mu * k)
    if not terms:
        return float("-inf")
    return float(logsumexp(np.concatenate(terms)))


def lambda_of_drift(spec: PhiSpec, g, cone: ConeSpec, n_max: int,
                    d: int | None = None, bracket=(1e-6, 12.0)) -> float:
    """Root of F(g, mu) = 0 in mu: the free energy at boundary drifts."""
    lo, hi = bracket
    f = lambda mu: implicit_surface_F(spec, g, mu, cone, n_max, d)
    flo, fhi = f(lo), f(hi)
    tries = 0
    while fhi > 0 and tries < 20:
        hi *= 1.5
        fhi = f(hi)
        tries += 1
    if flo < 0 or fhi > 0:
        raise ValueError("could not bracket the root of F(g, .)")
    return float(brentq(f, lo, hi, xtol=1e-13, rtol=8.9e-16))


def perturbed_correction_f(
    spec: PhiSpec,
    pert: PerturbationSpec,
    g,
    cone: ConeSpec,
    n_max: int,
    d: int | None = None,
    lam_g: float | None = None,
) -> dict:
    """Solve log Q^{g,lambda(g)}(e^{f |omega| - R(omega, g)}) = 0 for f.

    lambda(g) is taken as the truncated F-root, which normalizes the
    truncated piece family exactly; with R = 0 the solution is then
    exactly 0 and a linear tilt R = c|omega| returns exactly c (up to
    the root solver's 1e-13 tolerance).
    """
    g = np.atleast_1d(np.asarray(g, dtype=np.float64))
    d = d if d is not None else len(g)
    if lam_g is None:
        lam_g = lambda_of_drift(spec, g, cone, n_max, d)
    QA, pieces = enumerate_irreducible(spec, cone, n_max, d, collect=True)
    corr = _site_correction(spec)
    if pieces is None:
        raise RuntimeError("piece collection unavailable")
    lens, codes = pieces
    steps = step_vectors(d)
    log_terms = np.empty(len(lens))
    r_vals = np.empty(len(lens))
    phi_grid = None
    for i, (k, code) in enumerate(zip(lens, codes)):
        dirs = np.empty(k, dtype=np.int64)
        c = int(code)
        for t in range(k):
            dirs[t] = c % (2 * d)
            c //= 2 * d
        sites = np.zeros((k + 1, d), dtype=np.int64)
        sites[1:] = np.cumsum(steps[dirs], axis=0)
        path = LatticePath(sites)
        from .potentials import potential_of_path

        phi_val = potential_of_path(spec, path)
        r_vals[i] = perturbation_R(pert, path, g)
        log_terms[i] = (-phi_val + corr + sites[-1] @ g - lam_g * k)

    ks = lens.astype(np.float64)

    def G(f):
        return float(logsumexp(log_terms + f * ks - r_vals))

    if abs(G(0.0)) < 1e-12:
        return {"f": 0.0, "lam_g": lam_g, "pieces": len(lens), "residual": G(0.0)}
    lo, hi = -1.0, 1.0
    while G(lo) > 0:
        lo *= 2
    while G(hi) < 0:
        hi *= 2
    f_root = float(brentq(G, lo, hi, xtol=1e-13, rtol=8.9e-16))
    return {"f": f_root, "lam_g": lam_g, "pieces": len(lens), "residual": G(f_root)}
