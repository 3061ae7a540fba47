"""Interaction potentials, grand-canonical weights and the model catalog.

A potential is a table l -> phi(l) over local times plus a locality kind.
Hard rejection is encoded as +inf; all weight arithmetic short-circuits
on the sentinel so no inf-inf can occur, and path weights live in the
log domain throughout.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .paths import LatticePath, Locality, count_pattern, local_times

__all__ = [
    "PhiSpec",
    "GCParams",
    "PerturbationSpec",
    "ContractError",
    "DegenerateModelError",
    "potential_of_path",
    "log_weight",
    "classify",
    "normalize_sl",
    "model_saw",
    "model_domb_joyce",
    "model_annealed",
    "model_reinforced",
    "model_free",
    "perturbation_zero",
    "perturbation_linear",
    "perturbation_pattern",
    "perturbation_edge_reinforcement",
]

INF = float("inf")


class ContractError(RuntimeError):
    """A declared numerical contract was violated at runtime."""


class DegenerateModelError(RuntimeError):
    """Every path was rejected; the model has no admissible configuration."""


@dataclass(frozen=True)
class PhiSpec:
    """Tabulated potential phi with a continuation rule beyond the table.

    ``values[l]`` is phi(l) for l = 0..L_max; +inf marks hard rejection.
    ``extension`` is "affine" (continue with the last finite increment)
    or "error".  Condition (N) -- phi(0) = 0, non-negative,
    non-decreasing -- is enforced at construction.
    """

    values: np.ndarray
    locality: Locality = Locality.SITE
    extension: str = "affine"
    name: str = "custom"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or len(values) < 2:
            raise ValueError("phi table needs entries for l = 0 and l = 1")
        if values[0] != 0.0:
            raise ValueError("condition (N) requires phi(0) = 0")
        if np.isnan(values).any() or (values[np.isfinite(values)] < 0).any():
            raise ValueError("condition (N) requires phi >= 0")
        finite = np.isfinite(values)
        if (np.diff(values[finite]) < 0).any() or not _inf_is_suffix(values):
            raise ValueError("condition (N) requires phi non-decreasing")
        if self.extension not in ("affine", "error"):
            raise ValueError("extension must be 'affine' or 'error'")
        values = np.ascontiguousarray(values)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def l_max(self) -> int:
        return len(self.values) - 1

    @property
    def key(self) -> tuple:
        digest = hashlib.sha1(self.values.tobytes()).hexdigest()
        return (self.locality.value, self.extension, self.l_max, digest)

    def phi(self, l: int) -> float:
        """phi(l), applying the continuation rule past the table end."""
        if l < 0:
            raise ValueError("local time must be non-negative")
        if l <= self.l_max:
            return float(self.values[l])
        if self.extension == "error":
            raise ValueError(f"l={l} beyond L_max={self.l_max} with extension='error'")
        last = self.values[-1]
        if not np.isfinite(last):
            return INF
        inc = float(last - self.values[-2]) if len(self.values) >= 2 else 0.0
        if not np.isfinite(inc):  # table ends ... finite, inf
            return INF
        return float(last + inc * (l - self.l_max))

    def table(self, l_max: int) -> np.ndarray:
        """Materialize phi on 0..l_max for the kernels."""
        if l_max <= self.l_max:
            return self.values[: l_max + 1]
        return np.array([self.phi(l) for l in range(l_max + 1)], dtype=np.float64)

    @property
    def is_free(self) -> bool:
        """True iff the potential vanishes identically."""
        if not np.isfinite(self.values).all() or self.values.any():
            return False
        return self.extension == "error" or self.values[-1] == self.values[-2] == 0.0


def _inf_is_suffix(values: np.ndarray) -> bool:
    """Monotone tables may only be +inf on a trailing segment."""
    inf_idx = np.flatnonzero(~np.isfinite(values))
    if len(inf_idx) == 0:
        return True
    return inf_idx[0] + len(inf_idx) == len(values)


@dataclass(frozen=True)
class GCParams:
    """Drift h and step penalty lambda of the grand-canonical weights."""

    h: np.ndarray = field(default_factory=lambda: np.zeros(2))
    lam: float = 0.0

    def __post_init__(self):
        h = np.atleast_1d(np.asarray(self.h, dtype=np.float64))
        if not np.isfinite(h).all() or not np.isfinite(self.lam):
            raise ValueError("drift and step penalty must be finite")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)


def potential_of_path(spec: PhiSpec, path: LatticePath) -> float:
    """Phi(gamma) = sum of phi over occupied sites or bonds; +inf rejects."""
    total = 0.0
    for count in local_times(path, spec.locality).values():
        v = spec.phi(count)
        if v == INF:
            return INF
        total += v
    return total


def log_weight(spec: PhiSpec, params: GCParams, path: LatticePath) -> float:
    """log W^{h,lambda} = -Phi + (h, D) - lambda*|gamma|; -inf when rejected."""
    phi_total = potential_of_path(spec, path)
    if phi_total == INF:
        return -INF
    disp = path.sites[-1] - path.sites[0]
    h = params.h
    if len(h) != path.d:
        raise ValueError("drift dimension does not match the path")
    return -phi_total + float(h @ disp) - params.lam * path.n_steps


def classify(spec: PhiSpec, check_range: int = 50) -> dict:
    """Brute-force check of conditions (N), (R), (A) up to l+m <= range.

    SL-trend reports phi(range)/range; for hard-core tables the trend is
    +inf.
    """
    if check_range > spec.l_max and spec.extension == "error":
        raise ValueError("check_range exceeds the stored table")
    phi = [spec.phi(l) for l in range(check_range + 1)]
    repulsive = True
    attractive = True
    for l in range(0, check_range + 1):
        for m in range(0, check_range + 1 - l):
            lhs = phi[l + m]
            rhs = phi[l] + phi[m]
            if lhs == rhs:  # covers the inf == inf hard-core case
                continue
            tol = 1e-12 * max(1.0, abs(rhs))
            if lhs < rhs - tol:
                repulsive = False
            if lhs > rhs + tol:
                attractive = False
    trend = phi[check_range] / check_range if check_range > 0 else 0.0
    return {"N": True, "R": repulsive, "A": attractive, "SL-trend": trend}


def normalize_sl(spec: PhiSpec) -> tuple[PhiSpec, float]:
    """Subtract the asymptotic linear slope so that phi(l)/l -> 0.

    Returns the shifted spec and the per-unit shift c.  The shift leaves
    every fixed-length canonical measure unchanged and is only valid
    when the result still satisfies condition (N) (concave tails).
    """
    values = spec.values
    if not np.isfinite(values).all():
        return spec, 0.0
    c = float(values[-1] - values[-2])
    if c == 0.0:
        return spec, 0.0
    shifted = values - c * np.arange(len(values))
    # the subtraction leaves 1-ulp noise on exact cancellations; snap it
    tol = 1e-9 * max(1.0, float(np.abs(values).max()))
    shifted[np.abs(shifted) < tol] = 0.0
    monotone = np.maximum.accumulate(shifted)
    if np.abs(monotone - shifted).max() > tol:
        raise ValueError(
            "sublinear normalization would break monotonicity; the tail "
            "increments are not the minimal ones"
        )
    out = PhiSpec(monotone, spec.locality, spec.extension, name=f"{spec.name}|sl")
    return out, c


# ---------------------------------------------------------------------------
# model catalog
# ---------------------------------------------------------------------------


def model_free(d_table: int = 64, locality: Locality = Locality.SITE) -> PhiSpec:
    """The non-interacting walk, phi = 0."""
    return PhiSpec(np.zeros(d_table + 1), locality, "affine", name="free")


def model_saw(locality: Locality = Locality.SITE) -> PhiSpec:
    """Self-avoiding walk: phi(l) = +inf for l > 1."""
    return PhiSpec(np.array([0.0, 0.0, INF]), locality, "affine", name="saw")


def model_domb_joyce(
    beta: float, locality: Locality = Locality.SITE, l_max: int = 10_000
) -> PhiSpec:
    """Soft self-repulsion phi(l) = beta*l*(l-1)/2."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    l = np.arange(l_max + 1, dtype=np.float64)
    return PhiSpec(beta * l * (l - 1) / 2, locality, "affine", name=f"domb-joyce({beta})")


def model_reinforced(
    betas, locality: Locality = Locality.SITE, l_max: int = 10_000
) -> PhiSpec:
    """Reinforced polymer: phi(l) = sum_{k<=l} beta_k.

    ``betas`` lists the head of the non-negative, non-increasing
    sequence; beyond it beta_k continues at the last listed value.
    """
    betas = np.asarray(betas, dtype=np.float64)
    if betas.ndim != 1 or len(betas) == 0:
        raise ValueError("betas must be a non-empty sequence")
    if (betas < 0).any():
        raise ValueError("beta_k must be non-negative")
    if (np.diff(betas) > 0).any():
        raise ValueError("beta_k must be non-increasing")
    full = np.full(l_max, betas[-1])
    full[: min(len(betas), l_max)] = betas[:l_max]
    values = np.concatenate([[0.0], np.cumsum(full)])
    return PhiSpec(values, locality, "affine", name="reinforced")


def model_annealed(
    v_spec: dict, locality: Locality = Locality.SITE, l_max: int | None = None
) -> PhiSpec:
    """Annealed walk in a random potential: phi(l) = -log E e^{l V}, V <= 0.

    ``v_spec`` selects the law of V:
      {"kind": "constant", "c": c}        -> phi(l) = c*l          (V = -c)
      {"kind": "exponential", "rate": r}  -> phi(l) = log(1 + l/r) (V = -Exp(r))
      {"kind": "atoms", "values": [...], "probs": [...]}  (values <= 0)
      {"kind": "density", "pdf": f, "support": (a, b)}    (b <= 0, quadrature)

    Closed forms are used where they exist; the density kind integrates
    with relative tolerance 1e-10 and defaults to a shorter table.
    """
    kind = v_spec["kind"]
    if l_max is None:
        l_max = 128 if kind == "density" else 10_000
    l = np.arange(l_max + 1, dtype=np.float64)
    if kind == "constant":
        c = float(v_spec["c"])
        if c < 0:
            raise ValueError("V = -c requires c >= 0")
        values = c * l
    elif kind == "exponential":
        rate = float(v_spec["rate"])
        if rate <= 0:
            raise ValueError("rate must be positive")
        values = np.log1p(l / rate)
    elif kind == "atoms":
        vals = np.asarray(v_spec["values"], dtype=np.float64)
        probs = np.asarray(v_spec["probs"], dtype=np.float64)
        if (vals > 0).any():
            raise ValueError("V must be essentially non-positive")
        if probs.min() < 0 or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probs must form a distribution")
        values = -logsumexp(np.log(probs)[None, :] + l[:, None] * vals[None, :], axis=1)
        values[0] = 0.0
    elif kind == "density":
        from scipy.integrate import quad

        pdf = v_spec["pdf"]
        a, b = v_spec["support"]
        if b > 0:
            raise ValueError("V must be essentially non-positive")
        values = np.empty(l_max + 1)
        for li in range(l_max + 1):
            integral, _ = quad(
                lambda v: pdf(v) * np.exp(li * v), a, b, epsrel=1e-10, limit=200
            )
            values[li] = -np.log(integral)
        values[0] = 0.0
    else:
        raise ValueError(f"unknown V kind: {kind}")
    return PhiSpec(values, locality, "affine", name=f"annealed({kind})")


MODEL_CATALOG = {
    "free": model_free,
    "saw": model_saw,
    "domb-joyce": model_domb_joyce,
    "annealed": model_annealed,
    "reinforced": model_reinforced,
}


def model_from_config(model_id: str, params: dict | None = None) -> PhiSpec:
    """Instantiate a catalog model from a string id and a parameter map."""
    if model_id not in MODEL_CATALOG:
        raise ValueError(f"unknown model id '{model_id}'")
    params = dict(params or {})
    if "locality" in params:
        params["locality"] = Locality(params["locality"])
    return MODEL_CATALOG[model_id](**params)


# ---------------------------------------------------------------------------
# perturbations (section-5 style small corrections R(gamma, g))
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PerturbationSpec:
    """A small path functional R with a declared bound |R| <= eps*|gamma|.

    ``center``/``radius`` declare the drift neighbourhood on which the
    bound is asserted; ``locality_flag`` marks perturbations that are
    additive over edge-disjoint concatenations (tested, never assumed).
    """

    evaluator: object
    epsilon: float
    center: np.ndarray
    radius: float
    locality_flag: bool = False
    name: str = "custom"

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=np.float64))
        center.setflags(write=False)
        object.__setattr__(self, "center", center)


def perturbation_R(pert: PerturbationSpec, path: LatticePath, g) -> float:
    """Evaluate R(gamma, g), enforcing the declared epsilon bound."""
    g = np.atleast_1d(np.asarray(g, dtype=np.float64))
    if np.linalg.norm(g - pert.center) > pert.radius + 1e-12:
        raise ValueError("drift g outside the declared neighbourhood")
    value = float(pert.evaluator(path, g))
    bound = pert.epsilon * path.n_steps + 1e-12
    if abs(value) > bound:
        raise ContractError(
            f"|R| = {abs(value):.6g} exceeds eps*|gamma| = {bound:.6g} "
            f"for perturbation '{pert.name}'"
        )
    return value


def perturbation_zero(center=(0.0, 0.0), radius: float = INF) -> PerturbationSpec:
    return PerturbationSpec(
        lambda path, g: 0.0, 0.0, center, radius, locality_flag=True, name="zero"
    )


def perturbation_linear(c: float, center=(0.0, 0.0), radius: float = INF) -> PerturbationSpec:
    """R = c * |gamma|: exactly additive over any concatenation."""
    return PerturbationSpec(
        lambda path, g: c * path.n_steps,
        abs(c),
        center,
        radius,
        locality_flag=True,
        name=f"linear({c})",
    )


def perturbation_pattern(delta: float, pattern, center=(0.0, 0.0), radius: float = INF):
    """R = delta * N_eta(gamma); N_eta <= |gamma| gives the epsilon bound."""
    return PerturbationSpec(
        lambda path, g: delta * count_pattern(path, pattern),
        abs(delta),
        center,
        radius,
        locality_flag=False,
        name=f"pattern({delta})",
    )


def perturbation_edge_reinforcement(
    eps: float, center=(0.0, 0.0), radius: float = 1.0
) -> PerturbationSpec:
    """Small edge reinforcement with a bounded concave profile.

    beta(l) = eps*(1 - 2^-l) is non-decreasing, concave and bounded by
    eps, so each step contributes at most eps to |R|.  The per-step term
    compares the running unoriented-bond local time of the bond actually
    taken with that of the bond a drifted simple-random-walk step would
    take.
    """

    def beta(l: int) -> float:
        return eps * (1.0 - 0.5**l)

    def evaluator(path: LatticePath, g: np.ndarray) -> float:
        from .paths import step_vectors

        sites = path.sites
        d = path.d
        steps = step_vectors(d)
        logits = steps @ g
        probs = np.exp(logits - logsumexp(logits))
        counts: dict = {}
        total = 0.0
        for t in range(path.n_steps):
            x = tuple(int(v) for v in sites[t])
            nxt = tuple(int(v) for v in sites[t + 1])
            taken = (x, nxt) if x <= nxt else (nxt, x)
            acc = 0.0
            for e_idx in range(2 * d):
                y = tuple(int(v) for v in sites[t] + steps[e_idx])
                bond = (x, y) if x <= y else (y, x)
                acc += probs[e_idx] * np.exp(
                    beta(counts.get(bond, 0)) - beta(counts.get(taken, 0))
                )
            total -= np.log(acc)
            counts[taken] = counts.get(taken, 0) + 1
        return total

    return PerturbationSpec(
        evaluator, eps, center, radius, locality_flag=False, name=f"edge-reinf({eps})"
    )
