"""Nearest-neighbour lattice paths on Z^d.

A path is an ordered sequence of sites; consecutive sites differ by one
unit step in the 1-norm.  Everything here is pure and operates on small
integer numpy arrays; batch enumeration helpers produce dense arrays for
the numba kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Locality",
    "LatticePath",
    "Pattern",
    "JunctionError",
    "validate_sites",
    "displacement",
    "local_times",
    "concatenate",
    "reverse",
    "count_pattern",
    "all_paths",
    "step_vectors",
]

# Coordinates are bounded by the number of steps, so int64 can never
# overflow at any enumerable scale; the constructor still checks.
_COORD_MAX = np.iinfo(np.int64).max // 4


class Locality(Enum):
    """Which local times a potential reads."""

    SITE = "site"
    ORIENTED_BOND = "oriented-bond"
    UNORIENTED_BOND = "unoriented-bond"


class JunctionError(ValueError):
    """Concatenation at mismatched junction sites."""


def step_vectors(d: int) -> np.ndarray:
    """The 2d unit steps in canonical order: +e1, -e1, +e2, -e2, ..."""
    steps = np.zeros((2 * d, d), dtype=np.int64)
    for axis in range(d):
        steps[2 * axis, axis] = 1
        steps[2 * axis + 1, axis] = -1
    return steps


def validate_sites(sites: np.ndarray) -> bool:
    """True iff consecutive sites differ by exactly one unit step."""
    sites = np.asarray(sites)
    if sites.ndim != 2 or sites.shape[0] < 1:
        return False
    if sites.shape[0] == 1:
        return True
    diffs = np.abs(np.diff(sites, axis=0)).sum(axis=1)
    return bool((diffs == 1).all())


@dataclass(frozen=True)
class LatticePath:
    """An n-step nearest-neighbour path; ``sites`` has shape (n+1, d)."""

    sites: np.ndarray

    def __post_init__(self):
        sites = np.ascontiguousarray(np.asarray(self.sites, dtype=np.int64))
        if sites.ndim != 2 or sites.shape[0] < 1 or sites.shape[1] < 1:
            raise ValueError("sites must be a non-empty (n+1, d) array")
        if np.abs(sites).max(initial=0) > _COORD_MAX:
            raise ValueError("coordinates exceed the supported integer width")
        if not validate_sites(sites):
            raise ValueError("consecutive sites must differ by one unit step")
        sites.setflags(write=False)
        object.__setattr__(self, "sites", sites)

    @classmethod
    def from_steps(cls, steps, d: int | None = None, origin=None) -> "LatticePath":
        """Build a path from a sequence of step vectors (or 1-d deltas)."""
        steps = np.asarray(steps, dtype=np.int64)
        if steps.ndim == 1 and d in (None, 1):
            steps = steps.reshape(-1, 1)
        d = steps.shape[1] if steps.ndim == 2 else (d or 1)
        sites = np.zeros((len(steps) + 1, d), dtype=np.int64)
        if origin is not None:
            sites[0] = origin
        if len(steps):
            sites[1:] = sites[0] + np.cumsum(steps, axis=0)
        return cls(sites)

    @property
    def d(self) -> int:
        return self.sites.shape[1]

    @property
    def n_steps(self) -> int:
        return self.sites.shape[0] - 1

    def __len__(self) -> int:
        return self.n_steps

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.sites, axis=0)

    def translated(self, v) -> "LatticePath":
        return LatticePath(self.sites + np.asarray(v, dtype=np.int64))

    def slice(self, i: int, j: int) -> "LatticePath":
        """Sub-path from site index i to site index j inclusive."""
        if not 0 <= i <= j <= self.n_steps:
            raise IndexError("slice indices out of range")
        return LatticePath(self.sites[i : j + 1])


@dataclass(frozen=True)
class Pattern:
    """A finite sub-path to be matched up to lattice shifts.

    Canonical form starts at the origin; matching compares step
    sequences, so reflections/rotations are *not* identified.
    """

    sites: np.ndarray

    def __post_init__(self):
        sites = np.asarray(self.sites, dtype=np.int64)
        if sites.ndim != 2 or sites.shape[0] < 2:
            raise ValueError("a pattern needs at least one step")
        if not validate_sites(sites):
            raise ValueError("pattern sites must form a nearest-neighbour path")
        sites = np.ascontiguousarray(sites - sites[0])
        sites.setflags(write=False)
        object.__setattr__(self, "sites", sites)

    @property
    def d(self) -> int:
        return self.sites.shape[1]

    @property
    def n_steps(self) -> int:
        return self.sites.shape[0] - 1

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.sites, axis=0)


def elementary_loop() -> Pattern:
    """The 3-step corner pattern (0, e1, e1+e2, e2) in d=2."""
    return Pattern(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=np.int64))


def displacement(path: LatticePath) -> np.ndarray:
    """End site minus start site."""
    return path.sites[-1] - path.sites[0]


def local_times(path: LatticePath, kind: Locality) -> dict:
    """Visit counts per site, or traversal counts per (un)oriented bond.

    Site keys are coordinate tuples; oriented-bond keys are (from, to)
    tuples; unoriented bonds are canonicalized as the lexicographically
    sorted endpoint pair.
    """
    counts: dict = {}
    sites = path.sites
    if kind is Locality.SITE:
        for row in sites:
            key = tuple(int(v) for v in row)
            counts[key] = counts.get(key, 0) + 1
        return counts
    for a, b in zip(sites[:-1], sites[1:]):
        ka = tuple(int(v) for v in a)
        kb = tuple(int(v) for v in b)
        if kind is Locality.ORIENTED_BOND:
            key = (ka, kb)
        else:
            key = (ka, kb) if ka <= kb else (kb, ka)
        counts[key] = counts.get(key, 0) + 1
    return counts


def concatenate(pieces) -> LatticePath:
    """Join paths whose junction sites agree; lengths add."""
    pieces = list(pieces)
    if not pieces:
        raise ValueError("nothing to concatenate")
    sites = [pieces[0].sites]
    for prev, nxt in zip(pieces[:-1], pieces[1:]):
        if not np.array_equal(prev.sites[-1], nxt.sites[0]):
            raise JunctionError(
                f"junction mismatch: {prev.sites[-1].tolist()} != {nxt.sites[0].tolist()}"
            )
        sites.append(nxt.sites[1:])
    return LatticePath(np.concatenate(sites, axis=0))


def reverse(path: LatticePath) -> LatticePath:
    """The same sites walked backwards."""
    return LatticePath(path.sites[::-1])


def count_pattern(path: LatticePath, pattern: Pattern) -> int:
    """Number of shifted occurrences of the pattern inside the path.

    Every starting index counts independently, so overlapping
    occurrences are all included.
    """
    if pattern.d != path.d:
        raise ValueError("dimension mismatch between path and pattern")
    p = pattern.n_steps
    n = path.n_steps
    if p > n:
        return 0
    psteps = pattern.steps
    steps = path.steps
    windows = np.lib.stride_tricks.sliding_window_view(steps, (p, path.d))[:, 0]
    return int((windows == psteps).all(axis=(1, 2)).sum())


def all_paths(d: int, n: int) -> np.ndarray:
    """Positions of every n-step path from the origin, shape ((2d)^n, n+1, d).

    Step codes run in the canonical direction order; the row index is the
    base-(2d) encoding of the step sequence, most significant digit first.
    """
    if n == 0:
        return np.zeros((1, 1, d), dtype=np.int64)
    total = (2 * d) ** n
    if total * (n + 1) * d > 200_000_000:
        raise ValueError(f"all_paths(d={d}, n={n}) is too large to materialize")
    codes = np.arange(total, dtype=np.int64)
    digits = np.empty((total, n), dtype=np.int64)
    for k in range(n - 1, -1, -1):
        digits[:, k] = codes % (2 * d)
        codes //= 2 * d
    steps = step_vectors(d)[digits]
    out = np.zeros((total, n + 1, d), dtype=np.int64)
    np.cumsum(steps, axis=1, out=out[:, 1:])
    return out
