"""Coarse-grained skeletons, cone points and the irreducible decomposition.

The skeleton algorithms follow the two-clock constructions verbatim:
repulsive trunks advance to the first exit of the current xi-ball;
attractive trunks jump past the last return, with the backtrack pieces
skeletonized in reverse as hairs.  One extension handles finite paths
that end inside the current ball after an excursion (the construction
is stated for first-hit paths marching off to a far target): the
forward tail is skeletonized as a hair rooted at the last trunk vertex,
which preserves P1/P2 exactly.

Cone points come in three apertures: trunk level (directional, delta),
skeleton level (union of cones, 2*delta) and path level (union,
3*delta); splitting a path at its cone points yields the irreducible
decomposition whose pieces carry the product weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .enumeration import CapExceededError, NEG_INF, enumeration_cap
from .geometry import ConeSpec, NormTable, cone_contains, cone_union_grid
from .paths import LatticePath, Locality, concatenate
from .potentials import GCParams, PhiSpec, log_weight

__all__ = [
    "Skeleton",
    "IrreducibleDecomposition",
    "skeleton_repulsive",
    "skeleton_attractive",
    "verify_p1_p2",
    "skeleton_stats",
    "cone_points_trunk",
    "cone_points_skeleton",
    "cone_points_path",
    "irreducible_decompose",
    "piece_weight_identity",
    "enumerate_irreducible",
    "q_measure_mass",
    "q_tail_stats",
    "batch_p1_p2",
]


@dataclass(frozen=True)
class Skeleton:
    """Trunk vertices (with their path indices) and hairs per trunk slot.

    ``hairs`` maps a trunk slot to a list of (sites, indices) pairs: a
    vertex can own both a backtrack hair and, at the end of a finite
    path, the forward tail hair.
    """

    K: float
    trunk_sites: np.ndarray
    trunk_indices: np.ndarray
    hairs: dict
    attractive: bool

    @property
    def m(self) -> int:
        return len(self.trunk_sites) - 1

    @property
    def hair_steps(self) -> int:
        return sum(len(idx) for hs in self.hairs.values() for _, idx in hs)

    def hair_vertices(self):
        for hs in self.hairs.values():
            for sites, idx in hs:
                for s, j in zip(sites, idx):
                    yield s, j

    def all_indices(self) -> np.ndarray:
        idx = list(self.trunk_indices)
        for hs in self.hairs.values():
            for _, hidx in hs:
                idx.extend(hidx)
        return np.array(sorted(idx), dtype=np.int64)


def _ball_contains(table: NormTable, center, site, K: float) -> bool:
    return float(table.xi_hat(np.asarray(site) - np.asarray(center))) <= K


def _repulsive_indices(sites: np.ndarray, start: int, stop: int,
                       table: NormTable, K: float) -> list:
    """Path indices of the repulsive trunk of sites[start..stop]."""
    out = [start]
    tau = start
    while True:
        u = sites[tau]
        nxt = None
        for j in range(tau + 1, stop + 1):
            if not _ball_contains(table, u, sites[j], K):
                nxt = j
                break
        if nxt is None:
            return out
        out.append(nxt)
        tau = nxt


def skeleton_repulsive(path: LatticePath, K: float, table: NormTable) -> Skeleton:
    """First-exit trunk; terminates in at most |gamma| iterations."""
    if K <= 0:
        raise ValueError("the skeleton scale K must be positive")
    sites = path.sites
    idx = _repulsive_indices(sites, 0, path.n_steps, table, K)
    trunk = np.array(idx, dtype=np.int64)
    return Skeleton(K, sites[trunk].copy(), trunk, {}, False)


def skeleton_attractive(path: LatticePath, K: float, table: NormTable) -> Skeleton:
    """Two-clock trunk (first exit / last return) with reversed-piece hairs."""
    if K <= 0:
        raise ValueError("the skeleton scale K must be positive")
    sites = path.sites
    n = path.n_steps
    trunk_idx = [0]
    hairs: dict = {}
    tau = 0
    while True:
        u = sites[tau]
        sigma = None
        for j in range(tau + 1, n + 1):
            if not _ball_contains(table, u, sites[j], K):
                sigma = j
                break
        if sigma is None:
            break
        last_in = tau
        for j in range(tau + 1, n + 1):
            if _ball_contains(table, u, sites[j], K):
                last_in = j
        if last_in == n:
            # finite-path extension: excursion returns and the path ends
            # inside the current ball; hair the forward tail at u.
            hidx = _repulsive_indices(sites, tau, n, table, K)[1:]
            if hidx:
                hairs.setdefault(len(trunk_idx) - 1, []).append(
                    (sites[np.array(hidx)].copy(), hidx)
                )
            break
        tau_next = last_in + 1
        u_new = sites[tau_next]
        piece = range(sigma, tau_next)
        if any(not _ball_contains(table, u_new, sites[j], K) for j in piece):
            rev = sites[tau_next: sigma - 1 if sigma > 0 else None: -1]
            ridx = _repulsive_indices(rev, 0, len(rev) - 1, table, K)[1:]
            hidx = [tau_next - r for r in ridx]
            hairs.setdefault(len(trunk_idx), []).append(
                (sites[np.array(hidx)].copy(), hidx)
            )
        trunk_idx.append(tau_next)
        tau = tau_next
    trunk = np.array(trunk_idx, dtype=np.int64)
    return Skeleton(K, sites[trunk].copy(), trunk, hairs, True)


def verify_p1_p2(path: LatticePath, skeleton: Skeleton, K: float,
                 table: NormTable) -> dict:
    """Check P1 (vertices on the path) and P2 (portions between
    consecutive skeleton indices stay in the union of the end balls)."""
    sites = path.sites
    violations = []
    for t, j in enumerate(skeleton.trunk_indices):
        if not np.array_equal(sites[j], skeleton.trunk_sites[t]):
            violations.append(("P1-trunk", int(j)))
    for s, j in skeleton.hair_vertices():
        if not np.array_equal(sites[j], s):
            violations.append(("P1-hair", int(j)))
    idx = skeleton.all_indices()
    for a, b in zip(idx[:-1], idx[1:]):
        ua, ub = sites[a], sites[b]
        for j in range(a, b + 1):
            if not (_ball_contains(table, ua, sites[j], K)
                    or _ball_contains(table, ub, sites[j], K)):
                violations.append(("P2", int(j)))
    last = idx[-1]
    for j in range(last, path.n_steps + 1):
        if not _ball_contains(table, sites[last], sites[j], K):
            violations.append(("P2-tail", int(j)))
    return {"ok": not violations, "violations": violations}


def skeleton_stats(skeleton: Skeleton) -> dict:
    """Trunk step count and total hair K-length."""
    return {"m": skeleton.m, "r": skeleton.hair_steps}


def batch_p1_p2(paths_sites: np.ndarray, K: float, table: NormTable,
                attractive: bool) -> dict:
    """Kernel-backed P1/P2 sweep over a batch of equal-length paths.

    paths_sites: (P, n+1, d) integer array.  Returns total violations
    and the per-path trunk/hair statistics.
    """
    P, np1, d = paths_sites.shape
    n = np1 - 1
    side = 2 * n + 1
    strides = side ** np.arange(d, dtype=np.int64)
    idx = ((paths_sites + n) @ strides).astype(np.int64)
    xi_grid = table.xi_offset_grid(n)
    center = int(((side - 1) // 2) * strides.sum())
    viol, m, r = _kernels.batch_skeleton_stats(
        idx, n, xi_grid, center, float(K), attractive
    )
    return {
        "paths": P,
        "violations": int(viol.sum()),
        "violating_paths": int((viol > 0).sum()),
        "trunk_steps": m,
        "hair_steps": r,
    }


# ---------------------------------------------------------------------------
# cone points
# ---------------------------------------------------------------------------


def cone_points_trunk(trunk_sites, cone: ConeSpec) -> list:
    """Directional cone points of a trunk (aperture multiplier 1)."""
    if cone.multiplier != 1:
        raise ValueError("trunk cone points use aperture multiplier 1")
    sites = np.asarray(trunk_sites)
    m = len(sites)
    out = []
    for k in range(m):
        fwd = all(
            cone_contains(cone, sites[j] - sites[k]) for j in range(k + 1, m)
        )
        bwd = all(
            cone_contains(cone, sites[j] - sites[k], backward=True)
            for j in range(k)
        )
        if fwd and bwd:
            out.append(k)
    return out


def _in_union(cone: ConeSpec, y) -> bool:
    return cone_contains(cone, y) or cone_contains(cone, y, backward=True)


def cone_points_skeleton(skeleton: Skeleton, cone: ConeSpec):
    """Union-cone points of the full skeleton (aperture multiplier 2).

    Returns (cone_points, blocked): trunk slots whose double cone holds
    the trunk but fails only because of hairs are reported blocked.
    """
    if cone.multiplier != 2:
        raise ValueError("skeleton cone points use aperture multiplier 2")
    trunk = skeleton.trunk_sites
    hair_sites = [s for s, _ in skeleton.hair_vertices()]
    cones, blocked = [], []
    for k in range(len(trunk)):
        base = trunk[k]
        trunk_ok = all(_in_union(cone, s - base) for s in trunk)
        full_ok = trunk_ok and all(_in_union(cone, s - base) for s in hair_sites)
        if full_ok:
            cones.append(k)
        elif trunk_ok:
            blocked.append(k)
    return cones, blocked


def cone_points_path(path: LatticePath, cone: ConeSpec) -> list:
    """Union-cone points of the microscopic path (multiplier 3)."""
    if cone.multiplier != 3:
        raise ValueError("path cone points use aperture multiplier 3")
    sites = path.sites
    n = path.n_steps
    out = []
    for k in range(n + 1):
        base = sites[k]
        if all(_in_union(cone, sites[j] - base) for j in range(n + 1)):
            out.append(k)
    return out


@dataclass(frozen=True)
class IrreducibleDecomposition:
    omega_L: LatticePath
    pieces: tuple
    omega_R: LatticePath
    breakpoints: tuple
    single_block: bool

    def reassemble(self) -> LatticePath:
        parts = [self.omega_L, *self.pieces, self.omega_R]
        return concatenate([p for p in parts if p.n_steps > 0] or [self.omega_L])


def irreducible_decompose(path: LatticePath, cone: ConeSpec) -> IrreducibleDecomposition:
    """Split the path at its cone points.

    omega_L ends at the first cone point (empty when index 0 is one),
    omega_R starts at the last; with no cone points at all the whole
    path comes back as a single flagged block.
    """
    cps = cone_points_path(path, cone)
    n = path.n_steps
    if not cps:
        return IrreducibleDecomposition(
            path, (), LatticePath(path.sites[-1:]), (), True
        )
    first, last = cps[0], cps[-1]
    omega_L = path.slice(0, first)
    omega_R = path.slice(last, n)
    pieces = tuple(
        path.slice(a, b) for a, b in zip(cps[:-1], cps[1:])
    )
    return IrreducibleDecomposition(omega_L, pieces, omega_R, tuple(cps), False)


def piece_weight_identity(spec: PhiSpec, decomposition: IrreducibleDecomposition,
                          params: GCParams) -> float | None:
    """log W(gamma) minus the sum of corrected piece log-weights.

    Site-locality pieces other than omega_R carry the e^{phi(1)}
    end-point correction; bond localities need none.  Rejected paths
    (sentinel weight) return None.
    """
    gamma = decomposition.reassemble()
    total = log_weight(spec, params, gamma)
    if total == NEG_INF:
        return None
    corr = float(spec.values[1]) if spec.locality is Locality.SITE else 0.0
    acc = 0.0
    parts = [decomposition.omega_L, *decomposition.pieces, decomposition.omega_R]
    for i, piece in enumerate(parts):
        if piece.n_steps == 0 and i in (0, len(parts) - 1):
            # zero-step end pieces: weight e^{-phi(1)}, correction e^{phi(1)}
            acc += (-corr + corr) if spec.locality is Locality.SITE else 0.0
            continue
        lw = log_weight(spec, params, piece)
        if lw == NEG_INF:
            return None
        acc += lw + (corr if i < len(parts) - 1 else 0.0)
    return total - acc


# ---------------------------------------------------------------------------
# irreducible-piece enumeration and Q-measure bookkeeping
# ---------------------------------------------------------------------------

_IRR_CACHE: dict = {}


def enumerate_irreducible(spec: PhiSpec, cone: ConeSpec, n_max: int,
                          d: int | None = None, collect: bool = False):
    """QA[k, x] = sum of exp(-Phi) over irreducible k-step pieces to x.

    The path-level cone (multiplier 3) drives irreducibility.  When the
    cone union covers the whole offset grid every vertex of every path
    is a cone point, so the pieces are exactly the single steps; that
    shortcut is what keeps one-dimensional budgets of 40+ steps exact.
    """
    if cone.multiplier != 3:
        raise ValueError("irreducible pieces use aperture multiplier 3")
    d = d if d is not None else cone.table.d
    key = (spec.key, cone.key, d, n_max, collect)
    hit = _IRR_CACHE.get(key)
    if hit is not None:
        return hit
    union = cone_union_grid(cone, n_max)
    side = 2 * n_max + 1
    nsites = side**d
    QA = np.zeros((n_max + 1, nsites))
    if union.all():
        # every vertex of every path is a cone point, so the pieces are
        # exactly the single steps; no enumeration needed at any budget
        phi = spec.table(2)
        strides = side ** np.arange(d, dtype=np.int64)
        center = int(n_max * strides.sum())
        w = np.exp(-(2 * phi[1])) if spec.locality is Locality.SITE else np.exp(-phi[1])
        pieces = None
        if np.isfinite(phi[1]):
            for axis in range(d):
                QA[1, center + strides[axis]] = w
                QA[1, center - strides[axis]] = w
            if collect:
                pieces = (
                    np.ones(2 * d, dtype=np.int32),
                    np.arange(2 * d, dtype=np.int64),
                )
        elif collect:
            pieces = (np.zeros(0, dtype=np.int32), np.zeros(0, dtype=np.int64))
        result = (QA, pieces)
        _IRR_CACHE[key] = result
        return result
    limit = enumeration_cap(spec, d)
    if spec.is_free:
        limit = {1: 24, 2: 14}.get(d, 8)  # the piece DFS cannot use the DP
    if n_max > limit:
        raise CapExceededError(
            f"irreducible enumeration budget {n_max} exceeds cap {limit}"
        )
    phi = spec.table(n_max + 1)
    cap_paths = 3_000_000 if collect else 1
    coll_n = np.zeros(cap_paths, dtype=np.int32)
    coll_code = np.zeros(cap_paths, dtype=np.int64)
    loc = {"site": 0, "oriented-bond": 1, "unoriented-bond": 2}[spec.locality.value]
    found = _kernels.enum_irreducible(
        d, n_max, phi, loc, union, QA, collect, coll_n, coll_code
    )
    pieces = None
    if collect:
        if found > cap_paths:
            raise CapExceededError("too many irreducible pieces to collect")
        pieces = (coll_n[:found].copy(), coll_code[:found].copy())
    result = (QA, pieces)
    _IRR_CACHE[key] = result
    return result


def _site_correction(spec: PhiSpec) -> float:
    return float(spec.values[1]) if spec.locality is Locality.SITE else 0.0


def q_measure_mass(spec: PhiSpec, h, lam: float, n_max: int, cone: ConeSpec,
                   d: int | None = None, tol: float = 1e-2) -> dict:
    """Truncated mass of the corrected weights over irreducible pieces.

    Reports the cumulative mass per budget; at a true boundary drift it
    increases toward 1 from below, and mass beyond 1 + tol flags the
    drift as materially outside the shape (diagnostic, not fatal).
    """
    h = np.atleast_1d(np.asarray(h, dtype=np.float64))
    d = d if d is not None else len(h)
    QA, _ = enumerate_irreducible(spec, cone, n_max, d)
    side = int(round(QA.shape[1] ** (1.0 / d)))
    n_grid = (side - 1) // 2
    corr = _site_correction(spec)
    per_n = np.zeros(n_max + 1)
    for k in range(1, n_max + 1):
        nz = np.flatnonzero(QA[k])
        if len(nz) == 0:
            continue
        coords = _kernels.decode_sites(nz, d, n_grid)
        per_n[k] = float(np.exp(corr - lam * k) * (QA[k][nz] * np.exp(coords @ h)).sum())
    cum = np.cumsum(per_n)
    mass = float(cum[-1])
    return {
        "mass": mass,
        "cumulative": cum[1:].tolist(),
        "per_n": per_n[1:].tolist(),
        "monotone": bool(np.all(np.diff(cum) >= -1e-15)),
        "exceeds_one": bool(mass > 1.0 + tol),
        "n_max": n_max,
    }


def q_tail_stats(spec: PhiSpec, h, lam: float, cone: ConeSpec, n_max: int,
                 d: int | None = None) -> dict:
    """Exponential-tail fits of the piece mass in |omega| and ||D||.

    Least-squares slopes of log mass; non-negative slopes are reported
    as property violations.  Degenerate one-point supports (all pieces
    one step long) are flagged instead of fitted.
    """
    h = np.atleast_1d(np.asarray(h, dtype=np.float64))
    d = d if d is not None else len(h)
    QA, _ = enumerate_irreducible(spec, cone, n_max, d)
    side = int(round(QA.shape[1] ** (1.0 / d)))
    n_grid = (side - 1) // 2
    corr = _site_correction(spec)
    mass_n: dict = {}
    mass_r: dict = {}
    for k in range(1, n_max + 1):
        nz = np.flatnonzero(QA[k])
        if len(nz) == 0:
            continue
        coords = _kernels.decode_sites(nz, d, n_grid)
        w = QA[k][nz] * np.exp(coords @ h + corr - lam * k)
        mass_n[k] = mass_n.get(k, 0.0) + float(w.sum())
        radii = np.abs(coords).sum(axis=1)
        for r in np.unique(radii):
            mass_r[int(r)] = mass_r.get(int(r), 0.0) + float(w[radii == r].sum())

    def fit(d_map):
        ks = np.array(sorted(d_map))
        vs = np.array([d_map[k] for k in ks])
        keep = vs > 0
        ks, vs = ks[keep], vs[keep]
        if len(ks) < 2:
            return None
        slope = np.polyfit(ks, np.log(vs), 1)[0]
        return float(slope)

    slope_n = fit(mass_n)
    slope_r = fit(mass_r)
    return {
        "slope_length": slope_n,
        "slope_displacement": slope_r,
        "mass_by_length": mass_n,
        "mass_by_displacement": mass_r,
        "degenerate": slope_n is None and slope_r is None,
        "violations": [
            name
            for name, s in (("length", slope_n), ("displacement", slope_r))
            if s is not None and s >= 0
        ],
    }
