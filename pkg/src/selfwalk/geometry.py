"""Decay-rate norms, Wulff shapes, dual drifts, surcharges and cones.

The per-direction decay rate of the first-hit generating function is
estimated on a grid of coprime lattice directions and interpolated as a
support function: the polar body K = {h : (h, x_i) <= xi_i} is a
polytope, and xi_hat(y) = max over its vertices of (v, y) is the
largest convex positively homogeneous function consistent with the
samples.  Every ball, surcharge and cone query downstream reduces to a
few dot products against those vertices.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .enumeration import NEG_INF, enumeration_cap, hitting_gf
from .potentials import PhiSpec

__all__ = [
    "NormTable",
    "WulffShape",
    "ConeSpec",
    "DualDrift",
    "xi_estimate",
    "build_norm_table",
    "coprime_directions",
    "polar_norm",
    "wulff_membership",
    "dual_drift",
    "surcharge",
    "surcharge_trunk",
    "cone_contains",
    "cone_union_grid",
    "k_lambda0",
]


def coprime_directions(d: int, height: int = 2) -> np.ndarray:
    """All nonzero integer vectors with coprime entries and sup-norm
    <= height, in lexicographic order (closed under lattice symmetry)."""
    rng = range(-height, height + 1)
    out = []
    for idx in np.ndindex(*(2 * height + 1,) * d):
        v = np.array(idx) - height
        if not v.any():
            continue
        g = np.gcd.reduce(np.abs(v[v != 0]))
        if g == 1:
            out.append(v)
    arr = np.array(sorted(out, key=tuple), dtype=np.int64)
    return arr


def xi_estimate(
    spec: PhiSpec,
    direction,
    lam: float,
    M_range=None,
    n_max: int | None = None,
    d: int | None = None,
) -> dict:
    """Per-direction decay rate of H_lambda along integer multiples.

    Fits -(1/M) log H_lambda(M x) to a + b/M by least squares over the
    usable radii and returns the intercept with the fit residual as its
    error bar.  Entries are flagged when fewer than 4 radii fit in the
    budget or the fit is unstable.
    """
    x = np.asarray(direction, dtype=np.int64)
    d = d if d is not None else len(x)
    if n_max is None:
        n_max = enumeration_cap(spec, d)
    norm1 = int(np.abs(x).sum())
    if M_range is None:
        # radii beyond half the budget are truncation-dominated (at
        # M*|x|_1 = n_max only the straight path survives and the value
        # drifts toward lambda), so they are excluded by default
        M_range = range(1, max(2, n_max // (2 * norm1)) + 1)
    Ms, vals = [], []
    for M in M_range:
        if M * norm1 > n_max:
            continue
        g = hitting_gf(spec, M * x, lam, n_max, d)
        if g.logH == NEG_INF:
            continue
        Ms.append(M)
        vals.append(-g.logH / M)
    flags = []
    if len(Ms) < 2:
        return {"value": float("nan"), "error": float("inf"),
                "resid": float("inf"), "M_used": Ms, "flags": ["no-data"],
                "series": vals}
    if len(Ms) < 4:
        flags.append("few-radii")
    Ms_arr = np.asarray(Ms, dtype=np.float64)
    vals_arr = np.asarray(vals)
    X = np.stack([np.ones_like(Ms_arr), 1.0 / Ms_arr], axis=1)
    coef, *_ = np.linalg.lstsq(X, vals_arr, rcond=None)
    resid = vals_arr - X @ coef
    rms = float(np.sqrt((resid**2).mean()))
    # reported error: fit residual plus the unresolved extrapolation
    # gap (the tail still sits |v_last - a| above the intercept, and
    # slower log M / M corrections cannot be told apart at these radii)
    err = rms + abs(coef[1]) / Ms_arr.max() + 0.5 * abs(vals_arr[-1] - coef[0])
    a = float(coef[0])
    if a < 0:
        flags.append("negative-clamped")
        a = 0.0
    return {"value": a, "error": err, "resid": rms, "M_used": Ms,
            "flags": flags, "series": vals_arr.tolist()}


@dataclass(frozen=True)
class NormTable:
    """Estimated decay-rate norm on a grid of lattice directions."""

    lam: float
    directions: np.ndarray
    xi: np.ndarray
    errors: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        directions = np.asarray(self.directions, dtype=np.int64)
        xi = np.asarray(self.xi, dtype=np.float64)
        errors = np.asarray(self.errors, dtype=np.float64)
        if directions.ndim != 2 or len(directions) != len(xi) != 0:
            if len(directions) == 0:
                raise ValueError("norm table needs at least one direction")
        if (xi < 0).any():
            raise ValueError("xi values must be non-negative")
        for arr in (directions, xi, errors):
            arr.setflags(write=False)
        object.__setattr__(self, "directions", directions)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "errors", errors)

    @property
    def d(self) -> int:
        return self.directions.shape[1]

    @property
    def key(self) -> tuple:
        digest = hashlib.sha1(
            self.directions.tobytes() + self.xi.tobytes() + self.errors.tobytes()
            + repr(sorted(map(repr, self.meta.get("resid", [])))).encode()
        ).hexdigest()
        return (self.d, round(self.lam, 12), digest)

    @property
    def rel_error(self) -> float:
        """Direction-relative uncertainty driving cone-membership calls.

        Cone membership is invariant under a common rescaling of the
        table (duals taken from the same table rescale with it), so
        only the per-direction fit residuals matter here; the reported
        ``errors`` keep the full estimate including the common-mode
        extrapolation gap.
        """
        if len(self.xi) == 0:
            return 0.0
        xi = np.where(self.xi > 0, self.xi, np.inf)
        resid = self.meta.get("resid")
        if resid is not None and len(resid) == len(self.xi):
            return float(np.max(np.asarray(resid) / xi))
        return float(np.max(self.errors / xi))

    @property
    def vertices(self) -> np.ndarray:
        """Vertices of K = {h : (h, x_i) <= xi_i} (polar polytope)."""
        cached = _VERTEX_CACHE.get(self.key)
        if cached is None:
            cached = _polytope_vertices(self.directions, self.xi)
            _VERTEX_CACHE[self.key] = cached
        return cached

    def xi_hat(self, y) -> float | np.ndarray:
        """Support-function interpolation of xi at arbitrary vectors."""
        y = np.asarray(y, dtype=np.float64)
        vals = y @ self.vertices.T
        return vals.max(axis=-1)

    def xi_offset_grid(self, n_off: int) -> np.ndarray:
        """Dense xi_hat over all offsets |delta_i| <= n_off (kernel food)."""
        key = (self.key, n_off)
        grid = _GRID_CACHE.get(key)
        if grid is None:
            side = 2 * n_off + 1
            axes = np.arange(side) - n_off
            coords = np.stack(
                np.meshgrid(*([axes] * self.d), indexing="ij"), axis=-1
            ).reshape(-1, self.d)
            # grid index convention: sum_i (x_i + n) * side**i
            order = np.ravel_multi_index(
                tuple((coords[:, i] + n_off) for i in range(self.d)),
                (side,) * self.d,
                order="F",
            )
            grid = np.empty(side**self.d)
            grid[order] = (coords @ self.vertices.T).max(axis=1)
            _GRID_CACHE[key] = grid
        return grid


_VERTEX_CACHE: dict = {}
_GRID_CACHE: dict = {}


def _polytope_vertices(directions: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Vertices of the bounded polytope {h : (h, x_i) <= xi_i}.

    Directions spanning all of R^d are required (guaranteed for
    symmetry-closed grids with positive xi).
    """
    d = directions.shape[1]
    pos = xi > 0
    if not pos.any():
        return np.zeros((1, d))
    A = directions[pos].astype(np.float64)
    b = xi[pos]
    if d == 1:
        up = np.min(b[A[:, 0] > 0] / A[A[:, 0] > 0, 0])
        lo = np.max(-b[A[:, 0] < 0] / (-A[A[:, 0] < 0, 0]))
        return np.array([[lo], [up]])
    if d == 2:
        pts = []
        m = len(A)
        for i in range(m):
            for j in range(i + 1, m):
                M = np.stack([A[i], A[j]])
                det = np.linalg.det(M)
                if abs(det) < 1e-12:
                    continue
                p = np.linalg.solve(M, np.array([b[i], b[j]]))
                if (A @ p <= b * (1 + 1e-9) + 1e-12).all():
                    pts.append(p)
        if not pts:
            return np.zeros((1, d))
        pts = np.unique(np.round(np.array(pts), 12), axis=0)
        ang = np.arctan2(pts[:, 1], pts[:, 0])
        return pts[np.argsort(ang)]
    from scipy.spatial import HalfspaceIntersection

    halfspaces = np.hstack([A, -b[:, None]])
    interior = np.zeros(d)
    hs = HalfspaceIntersection(halfspaces, interior)
    return np.unique(np.round(hs.intersections, 12), axis=0)


def build_norm_table(
    spec: PhiSpec,
    lam: float,
    d: int = 2,
    height: int = 2,
    M_range=None,
    n_max: int | None = None,
    workers: int = 1,
) -> NormTable:
    """Estimate xi on the coprime direction grid.

    The spec default grid height (8) is infeasible at enumeration caps,
    so height 2 is the practical default; interaction-free models can
    afford more.  Direction order is canonical, so the table is
    reproducible regardless of worker count.
    """
    dirs = coprime_directions(d, height)
    if n_max is None:
        n_max = enumeration_cap(spec, d)

    def one(i):
        return xi_estimate(spec, dirs[i], lam, M_range, n_max, d)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(one, range(len(dirs))))
    else:
        results = [one(i) for i in range(len(dirs))]
    xi = np.array([r["value"] for r in results])
    errors = np.array([r["error"] for r in results])
    keep = np.isfinite(xi)
    meta = {
        "model": spec.name,
        "n_max": n_max,
        "resid": [results[i]["resid"] for i in range(len(dirs)) if keep[i]],
        "flags": {tuple(map(int, dirs[i])): results[i]["flags"]
                  for i in range(len(dirs)) if results[i]["flags"]},
        "M_used": {tuple(map(int, dirs[i])): results[i]["M_used"]
                   for i in range(len(dirs))},
    }
    return NormTable(lam, dirs[keep], xi[keep], errors[keep], meta)


def polar_norm(table: NormTable, h) -> float:
    """xi*(h) = max over grid directions of (h, x) / xi(x).

    Directions with xi = 0 force +inf as soon as h has positive overlap
    with them (the repulsive lambda -> lambda_0 regime).
    """
    h = np.asarray(h, dtype=np.float64)
    num = table.directions @ h
    out = 0.0
    for v, xi in zip(num, table.xi):
        if xi > 0:
            out = max(out, v / xi)
        elif v > 1e-15:
            return float("inf")
    return float(out)


@dataclass(frozen=True)
class WulffShape:
    """Unit ball of the polar norm, with a boundary tolerance."""

    table: NormTable
    tol: float = 5e-3

    @property
    def lam(self) -> float:
        return self.table.lam


def wulff_membership(shape: WulffShape, h) -> str:
    """Classify h against the shape: 'inside', 'boundary' or 'outside'."""
    star = polar_norm(shape.table, h)
    if abs(star - 1.0) <= shape.tol:
        return "boundary"
    return "inside" if star < 1.0 else "outside"


@dataclass(frozen=True)
class DualDrift:
    h: np.ndarray
    value: float
    non_unique: bool


def dual_drift(table: NormTable, x) -> DualDrift:
    """A drift on the shape boundary with (h, x) = xi_hat(x).

    Maximizes (h, x) over the polar polytope; on flat facets the
    minimal-norm maximizer is returned and flagged non-unique.
    """
    x = np.asarray(x, dtype=np.float64)
    verts = table.vertices
    vals = verts @ x
    best = vals.max()
    scale = max(abs(best), 1e-30)
    opt = np.flatnonzero(vals >= best - 1e-9 * scale)
    if len(opt) == 1:
        return DualDrift(verts[opt[0]].copy(), float(best), False)
    sel = verts[opt]
    # minimal-norm point on the optimal face: for a segment this is the
    # projection of the origin, clipped to the face.
    if len(opt) == 2:
        v1, v2 = sel
        dv = v2 - v1
        t = np.clip(-(v1 @ dv) / max(dv @ dv, 1e-30), 0.0, 1.0)
        h = v1 + t * dv
    else:
        h = sel[np.argmin((sel**2).sum(axis=1))].copy()
    return DualDrift(h, float(best), True)


def surcharge(table: NormTable, h, y) -> float:
    """s_h(y) = xi_hat(y) - (h, y); zero exactly on dual directions."""
    y = np.asarray(y, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    return float(table.xi_hat(y) - h @ y)


def surcharge_trunk(table: NormTable, h, trunk_sites) -> float:
    """Sum of increment surcharges along a trunk."""
    sites = np.asarray(trunk_sites, dtype=np.float64)
    total = 0.0
    for a, b in zip(sites[:-1], sites[1:]):
        total += surcharge(table, h, b - a)
    return total


@dataclass(frozen=True)
class ConeSpec:
    """Cone geometry around a boundary drift.

    ``multiplier`` selects the working aperture (1 trunk, 2 skeleton,
    3 path).  Construction refuses drifts whose 3x-aperture forward
    cone contains no lattice unit vector.
    """

    h: np.ndarray
    delta: float
    multiplier: int
    table: NormTable

    def __post_init__(self):
        h = np.atleast_1d(np.asarray(self.h, dtype=np.float64))
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        if not 0 < self.delta < 1.0 / 3.0:
            raise ValueError("delta must lie in (0, 1/3)")
        if self.multiplier not in (1, 2, 3):
            raise ValueError("aperture multiplier must be 1, 2 or 3")
        units = np.concatenate([np.eye(self.table.d), -np.eye(self.table.d)])
        if not any(
            _cone_side(self.table, h, self.delta, 3, e) for e in units
        ):
            raise ValueError(
                "the 3-delta forward cone contains no lattice direction"
            )

    @property
    def key(self) -> tuple:
        return (tuple(np.round(self.h, 12)), round(self.delta, 12),
                self.multiplier, self.table.key)

    def with_multiplier(self, multiplier: int) -> "ConeSpec":
        return ConeSpec(self.h, self.delta, multiplier, self.table)


def _cone_side(table: NormTable, h, delta, multiplier, y) -> bool:
    y = np.asarray(y, dtype=np.float64)
    if not y.any():
        return True  # the origin lies in every cone by convention
    xi = float(table.xi_hat(y))
    s = xi - float(h @ y)
    ambig = table.rel_error * xi * (1.0 + multiplier * delta)
    return s < multiplier * delta * xi - ambig


def cone_contains(cone: ConeSpec, y, backward: bool = False) -> bool:
    """Strict membership in the forward (or backward) cone.

    Ambiguous cases within the table's error bars classify as outside,
    so no cone point is ever fabricated by estimation noise.
    """
    y = np.asarray(y, dtype=np.float64)
    if backward:
        y = -y
    return _cone_side(cone.table, cone.h, cone.delta, cone.multiplier, y)


def cone_union_grid(cone: ConeSpec, n_off: int) -> np.ndarray:
    """uint8 grid over offsets: forward-or-backward cone membership."""
    side = 2 * n_off + 1
    axes = np.arange(side) - n_off
    coords = np.stack(
        np.meshgrid(*([axes] * cone.table.d), indexing="ij"), axis=-1
    ).reshape(-1, cone.table.d)
    order = np.ravel_multi_index(
        tuple((coords[:, i] + n_off) for i in range(cone.table.d)),
        (side,) * cone.table.d,
        order="F",
    )
    xi = (coords @ cone.table.vertices.T).max(axis=1)
    hdot = coords @ cone.h
    thresh = cone.multiplier * cone.delta * xi - (
        cone.table.rel_error * xi * (1.0 + cone.multiplier * cone.delta)
    )
    fwd = (xi - hdot) < thresh
    bwd = (xi + hdot) < thresh
    zero = ~coords.any(axis=1)
    member = fwd | bwd | zero
    out = np.zeros(side**cone.table.d, dtype=np.uint8)
    out[order] = member
    return out


def k_lambda0(
    spec: PhiSpec,
    lambdas,
    d: int = 2,
    height: int = 2,
    n_max: int | None = None,
) -> dict:
    """Shape-limit scan: norm tables along a decreasing lambda sequence.

    Reports the per-lambda minimum of xi per unit Euclidean length, the
    trend toward the connectivity-constant bracket, and a limit
    classification: repulsive shapes collapse to a point, attractive
    ones stay full-dimensional (xi >= phi(1) * ell-1 norm).
    """
    lambdas = sorted(set(float(v) for v in lambdas), reverse=True)
    tables = {}
    min_per_unit = {}
    for lam in lambdas:
        t = build_norm_table(spec, lam, d, height, n_max=n_max)
        tables[lam] = t
        lengths = np.linalg.norm(t.directions, axis=1)
        min_per_unit[lam] = float((t.xi / lengths).min()) if len(t.xi) else 0.0
    phi1 = float(spec.values[1]) if np.isfinite(spec.values[1]) else 0.0
    last = min_per_unit[lambdas[-1]]
    bound_ok = None
    if phi1 > 0:
        t = tables[lambdas[-1]]
        norm1 = np.abs(t.directions).sum(axis=1)
        bound_ok = bool((t.xi >= phi1 * norm1 - t.errors - 1e-9).all())
    classification = "full-dimensional" if last > max(phi1, 0.05) / 2 else (
        "degenerate-point" if last < 0.05 else "undetermined"
    )
    return {
        "lambdas": lambdas,
        "tables": tables,
        "min_xi_per_unit": min_per_unit,
        "phi1_bound_holds": bound_ok,
        "classification": classification,
    }
