"""Metropolis sampling of the fixed-length canonical measure.

The chain mixes three symmetric proposal families: local kink flips,
head/tail regrowth of up to a few steps, and lattice-symmetry pivots of
the tail.  Acceptance is min(1, W(gamma')/W(gamma)) with incremental
potential updates; hard-core proposals are rejected before any sentinel
arithmetic.  Randomness comes from a counter-based Philox stream keyed
by (seed, chain id), so runs are reproducible and parallel chains are
independent by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import ConeSpec, cone_union_grid
from .paths import LatticePath, Locality, Pattern, count_pattern
from .potentials import DegenerateModelError, GCParams, PhiSpec

__all__ = [
    "ChainConfig",
    "ChainStats",
    "mcmc_sample",
    "batch_means_error",
    "estimate_speed",
    "estimate_endpoint_covariance",
    "estimate_cone_density",
    "estimate_pattern_frequency",
]

_LOC_CODE = {
    Locality.SITE: _kernels.LOC_SITE,
    Locality.ORIENTED_BOND: _kernels.LOC_OBOND,
    Locality.UNORIENTED_BOND: _kernels.LOC_UBOND,
}

_MOVE_NAMES = ("kink", "regrow", "pivot")


@dataclass(frozen=True)
class ChainConfig:
    """Chain layout: length, drift, move mix and schedule.

    ``move_mix`` gives (kink, regrow, pivot) proposal probabilities; a
    sweep is n proposals; thinning counts sweeps between stored
    samples.  lambda in ``params`` cancels at fixed length and is kept
    for diagnostics only.
    """

    n: int
    params: GCParams
    move_mix: tuple = (0.4, 0.3, 0.3)
    sweeps: int = 4000
    burn_in: int = 500
    thinning: int = 2
    seed: int = 0
    kmax: int = 4
    record_paths: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("chain length must be >= 1")
        mix = np.asarray(self.move_mix, dtype=np.float64)
        if len(mix) != 3 or (mix < 0).any() or abs(mix.sum() - 1.0) > 1e-9:
            raise ValueError("move_mix must be three non-negative weights summing to 1")
        if not 0 <= self.burn_in < self.sweeps:
            raise ValueError("burn_in must be < sweeps")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if not 1 <= self.kmax <= 4:
            raise ValueError("kmax must be in 1..4")


@dataclass(frozen=True)
class ChainStats:
    """Thinned observables and run diagnostics of one chain."""

    config: ChainConfig
    model: str
    displacements: np.ndarray  # (samples, d) float
    potentials: np.ndarray  # (samples,)
    acceptance: dict
    autocorr_sweeps: float
    underresolved: bool
    paths: np.ndarray | None = None

    @property
    def n_samples(self) -> int:
        return len(self.potentials)


def _lattice_symmetries(d: int) -> np.ndarray:
    """All signed permutation matrices (the hyperoctahedral group)."""
    from itertools import permutations, product

    mats = []
    for perm in permutations(range(d)):
        for signs in product((1, -1), repeat=d):
            M = np.zeros((d, d), dtype=np.int64)
            for i, (p, s) in enumerate(zip(perm, signs)):
                M[i, p] = s
            mats.append(M)
    return np.stack(mats)


def _initial_path(spec: PhiSpec, n: int, d: int) -> np.ndarray:
    """A positive-weight starting path: the straight segment works for
    every potential with phi(1) < inf."""
    if not np.isfinite(spec.values[1]):
        raise DegenerateModelError(
            f"model '{spec.name}' rejects even singly-visited sites"
        )
    coords = np.zeros((n + 1, d), dtype=np.int64)
    coords[:, 0] = np.arange(n + 1)
    return coords


def _integrated_autocorr(series: np.ndarray) -> float:
    """Sokal-windowed integrated autocorrelation time (in samples)."""
    x = np.asarray(series, dtype=np.float64)
    x = x - x.mean()
    m = len(x)
    if m < 8 or not x.any():
        return 1.0
    f = np.fft.rfft(x, n=2 * m)
    acf = np.fft.irfft(f * np.conj(f))[:m].real
    if acf[0] <= 0:
        return 1.0
    acf /= acf[0]
    tau = 1.0
    for t in range(1, m):
        tau += 2.0 * acf[t]
        if t >= 6.0 * tau:
            break
    return max(tau, 1.0)


def mcmc_sample(spec: PhiSpec, config: ChainConfig, chain_id: int = 0) -> ChainStats:
    """Run one Metropolis chain targeting P_n^h.

    Identical (spec, config, chain_id) runs are bit-identical.  The run
    is flagged underresolved when fewer than 50 autocorrelation times
    fit into the post-burn-in sweeps.
    """
    h = config.params.h
    d = len(h)
    n = config.n
    ngrid = n + config.kmax
    side = 2 * ngrid + 1
    nsites = side**d
    loc = _LOC_CODE[spec.locality]

    coords = _initial_path(spec, n, d)
    counts = np.zeros(nsites if loc == _kernels.LOC_SITE else nsites * 2 * d,
                      dtype=np.int32)
    strides = (side ** np.arange(d)).astype(np.int64)
    _kernels.retally_path(coords, n, ngrid, d, strides, loc, counts, 1)
    phi = spec.table(n + 2)
    phi_state = np.array([_kernels.potential_from_counts(counts, phi)])
    if not np.isfinite(phi_state[0]):
        raise DegenerateModelError("initial path rejected")

    mix_cdf = np.cumsum(np.asarray(config.move_mix, dtype=np.float64))
    syms = _lattice_symmetries(d)
    scratch = np.zeros((n + 2, d), dtype=np.int64)
    log_keys = np.zeros(8 * (n + 2), dtype=np.int64)
    log_deltas = np.zeros(8 * (n + 2), dtype=np.int64)
    acc = np.zeros(3, dtype=np.int64)
    prop = np.zeros(3, dtype=np.int64)

    rng = np.random.Generator(
        np.random.Philox(key=(np.uint64(config.seed) << np.uint64(32))
                         ^ np.uint64(chain_id))
    )

    def run(n_sweeps, uniforms):
        _kernels.mcmc_chunk(
            coords, counts, phi_state, d, n, ngrid, phi, loc, h,
            n_sweeps, mix_cdf, config.kmax, syms, uniforms,
            acc, prop, scratch, log_keys, log_deltas,
        )

    # burn-in in large chunks
    left = config.burn_in
    while left > 0:
        todo = min(left, max(1, 4_000_000 // max(n, 1)))
        run(todo, rng.random((todo * n, 8)))
        left -= todo

    keep = (config.sweeps - config.burn_in) // config.thinning
    disp = np.zeros((keep, d))
    pots = np.zeros(keep)
    paths = (np.zeros((keep, n + 1, d), dtype=np.int16)
             if config.record_paths else None)

    # sampling: thinning-sized kernel calls, uniforms drawn in blocks
    block = max(1, 65536 // max(config.thinning * n, 1))
    stored = 0
    while stored < keep:
        nblk = min(block, keep - stored)
        uni = rng.random((nblk * config.thinning * n, 8))
        for b in range(nblk):
            lo = b * config.thinning * n
            run(config.thinning, uni[lo: lo + config.thinning * n])
            disp[stored] = coords[n] - coords[0]
            pots[stored] = phi_state[0]
            if paths is not None:
                paths[stored] = coords - coords[0]
            stored += 1

    series = disp @ (h if np.linalg.norm(h) > 0 else np.eye(d)[0])
    tau_samples = _integrated_autocorr(series)
    tau_sweeps = tau_samples * config.thinning
    acceptance = {
        name: {"accepted": int(a), "proposed": int(p),
               "rate": float(a / p) if p else 0.0}
        for name, a, p in zip(_MOVE_NAMES, acc, prop)
    }
    post = config.sweeps - config.burn_in
    return ChainStats(
        config=config,
        model=spec.name,
        displacements=disp,
        potentials=pots,
        acceptance=acceptance,
        autocorr_sweeps=float(tau_sweeps),
        underresolved=bool(post < 50 * tau_sweeps),
        paths=paths,
    )


def batch_means_error(series: np.ndarray, n_batches: int = 32) -> float:
    """Standard error of the mean by batch means (>= 32 batches)."""
    series = np.asarray(series, dtype=np.float64)
    m = len(series)
    nb = min(n_batches, m)
    if nb < 2:
        return float("inf")
    size = m // nb
    trimmed = series[: nb * size].reshape(nb, size)
    means = trimmed.mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(nb))


def estimate_speed(stats: ChainStats) -> dict:
    """Mean displacement per step with batch-means errors."""
    n = stats.config.n
    per_step = stats.displacements / n
    v = per_step.mean(axis=0)
    err = np.array([batch_means_error(per_step[:, i]) for i in range(per_step.shape[1])])
    return {
        "v": v,
        "stderr": err,
        "n": n,
        "samples": stats.n_samples,
        "underresolved": stats.underresolved,
    }


def estimate_endpoint_covariance(stats_by_n: dict) -> dict:
    """Per-n endpoint covariance and the diffusive Var/n trend.

    ``stats_by_n`` maps chain length to ChainStats.  The trend tracks
    Var((D, h_hat))/n; with zero drift the first axis is used.
    """
    out = {"per_n": {}, "var_per_step": {}}
    for n, stats in sorted(stats_by_n.items()):
        D = stats.displacements
        cov = np.cov(D.T) if D.shape[1] > 1 else np.array([[D[:, 0].var(ddof=1)]])
        h = stats.config.params.h
        hhat = h / np.linalg.norm(h) if np.linalg.norm(h) > 0 else np.eye(D.shape[1])[0]
        proj = D @ hhat
        out["per_n"][n] = cov
        out["var_per_step"][n] = float(proj.var(ddof=1) / n)
    ns = sorted(out["var_per_step"])
    ratios = [
        out["var_per_step"][b] / out["var_per_step"][a]
        for a, b in zip(ns[:-1], ns[1:])
        if out["var_per_step"][a] > 0
    ]
    out["successive_ratios"] = ratios
    return out


def estimate_cone_density(stats: ChainStats, cone: ConeSpec) -> dict:
    """Mean fraction of path indices that are path-level cone points."""
    if stats.paths is None:
        raise ValueError("cone density needs record_paths=True")
    if cone.multiplier != 3:
        raise ValueError("path cone points use aperture multiplier 3")
    P, np1, d = stats.paths.shape
    n = np1 - 1
    side = 2 * n + 1
    strides = (side ** np.arange(d)).astype(np.int64)
    idx = ((stats.paths.astype(np.int64) + n) @ strides)
    union = cone_union_grid(cone, n)
    center = int(n * strides.sum())
    counts = _kernels.batch_cone_count(idx, n, union, center)
    fracs = counts / (n + 1)
    return {
        "density": float(fracs.mean()),
        "stderr": batch_means_error(fracs),
        "per_path": counts,
    }


def estimate_pattern_frequency(stats: ChainStats, pattern: Pattern) -> dict:
    """Mean of N_eta(gamma)/n with its batch-means error and variance."""
    if stats.paths is None:
        raise ValueError("pattern frequency needs record_paths=True")
    n = stats.paths.shape[1] - 1
    freqs = np.array([
        count_pattern(LatticePath(p.astype(np.int64)), pattern) / n
        for p in stats.paths
    ])
    return {
        "frequency": float(freqs.mean()),
        "stderr": batch_means_error(freqs),
        "variance": float(freqs.var(ddof=1)),
        "samples": len(freqs),
    }
