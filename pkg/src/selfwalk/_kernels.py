"""Numba kernels for the hot loops.

Grid convention: sites live on a dense hypercube of side S = 2*N + 1
centered at the origin, indexed by sum_i (x_i + N) * S**i.  N is the
step budget, so no path can leave the grid and offsets between two
sites of one path stay within the same encoding.

All kernels walk branches in the canonical direction order
(+e1, -e1, +e2, -e2, ...), which fixes the accumulation order and makes
every result reproducible bit-for-bit.
"""

from __future__ import annotations

import numpy as np
from numba import njit

LOC_SITE = 0
LOC_OBOND = 1
LOC_UBOND = 2

OBS_DOUBLED_BONDS = 0
OBS_PATTERN = 1


def grid_geometry(d: int, n_max: int):
    """Strides, center index and direction offsets for the dense grid."""
    side = 2 * n_max + 1
    strides = np.empty(d, dtype=np.int64)
    strides[0] = 1
    for i in range(1, d):
        strides[i] = strides[i - 1] * side
    center = int(n_max * strides.sum())
    offsets = np.empty(2 * d, dtype=np.int64)
    for axis in range(d):
        offsets[2 * axis] = strides[axis]
        offsets[2 * axis + 1] = -strides[axis]
    return side, strides, center, offsets


def decode_sites(indices: np.ndarray, d: int, n_max: int) -> np.ndarray:
    """Grid indices back to coordinate vectors."""
    side = 2 * n_max + 1
    out = np.empty((len(indices), d), dtype=np.int64)
    rem = indices.astype(np.int64).copy()
    for i in range(d):
        out[:, i] = rem % side - n_max
        rem //= side
    return out


@njit(cache=True, nogil=True)
def enum_prefix(d, n_max, phi, locality, A, AH):
    """DFS over every path of length <= n_max from the origin.

    Accumulates A[k, x] += exp(-Phi) for each k-step path ending at grid
    index x, and AH[k, x] for the sub-family whose endpoint is visited
    exactly once (first-hit paths).  Branches whose potential increment
    is the +inf sentinel are pruned before any arithmetic touches it.
    """
    side = 2 * n_max + 1
    nsites = 1
    for _ in range(d):
        nsites *= side
    strides = np.empty(d, dtype=np.int64)
    strides[0] = 1
    for i in range(1, d):
        strides[i] = strides[i - 1] * side
    center = 0
    for i in range(d):
        center += n_max * strides[i]
    off = np.empty(2 * d, dtype=np.int64)
    for axis in range(d):
        off[2 * axis] = strides[axis]
        off[2 * axis + 1] = -strides[axis]

    lt = np.zeros(nsites, dtype=np.int32)
    ub = np.zeros(nsites * d, dtype=np.int32) if locality == LOC_UBOND else np.zeros(1, dtype=np.int32)
    ob = np.zeros(nsites * 2 * d, dtype=np.int32) if locality == LOC_OBOND else np.zeros(1, dtype=np.int32)

    pos = np.empty(n_max + 1, dtype=np.int64)
    phis = np.empty(n_max + 1, dtype=np.float64)
    dirs = np.empty(n_max + 1, dtype=np.int32)
    adir = np.empty(n_max + 1, dtype=np.int32)

    pos[0] = center
    lt[center] = 1
    root_phi = phi[1] if locality == LOC_SITE else 0.0
    if np.isinf(root_phi):
        return
    phis[0] = root_phi
    w = np.exp(-root_phi)
    A[0, center] += w
    AH[0, center] += w
    dirs[0] = 0

    depth = 0
    while depth >= 0:
        if depth == n_max or dirs[depth] == 2 * d:
            cur = pos[depth]
            if depth > 0:
                lt[cur] -= 1
                j = adir[depth]
                if locality == LOC_UBOND:
                    axis = j >> 1
                    base = pos[depth - 1] if (j & 1) == 0 else cur
                    ub[base * d + axis] -= 1
                elif locality == LOC_OBOND:
                    ob[pos[depth - 1] * 2 * d + j] -= 1
            depth -= 1
            continue
        j = dirs[depth]
        dirs[depth] += 1
        cur = pos[depth]
        nxt = cur + off[j]
        if locality == LOC_SITE:
            c = lt[nxt]
            pv = phi[c + 1]
            if np.isinf(pv):
                continue
            dphi = pv - phi[c]
        elif locality == LOC_UBOND:
            axis = j >> 1
            base = cur if (j & 1) == 0 else nxt
            bidx = base * d + axis
            c = ub[bidx]
            pv = phi[c + 1]
            if np.isinf(pv):
                continue
            dphi = pv - phi[c]
            ub[bidx] += 1
        else:
            bidx = cur * 2 * d + j
            c = ob[bidx]
            pv = phi[c + 1]
            if np.isinf(pv):
                continue
            dphi = pv - phi[c]
            ob[bidx] += 1
        depth += 1
        pos[depth] = nxt
        adir[depth] = j
        dirs[depth] = 0
        phis[depth] = phis[depth - 1] + dphi
        lt[nxt] += 1
        w = np.exp(-phis[depth])
        A[depth, nxt] += w
        if lt[nxt] == 1:
            AH[depth, nxt] += w


@njit(cache=True, nogil=True)
def enum_restricted(d, n, phi, locality, obs_kind, pat_dirs, AF):
    """DFS at fixed length n accumulating AF[x, F(gamma)] += exp(-Phi).

    Observables: OBS_DOUBLED_BONDS counts unoriented bonds with local
    time > 1; OBS_PATTERN counts shifted occurrences of the direction
    word ``pat_dirs``.
    """
    side = 2 * n + 1
    nsites = 1
    for _ in range(d):
        nsites *= side
    strides = np.empty(d, dtype=np.int64)
    strides[0] = 1
    for i in range(1, d):
        strides[i] = strides[i - 1] * side
    center = 0
    for i in range(d):
        center += n * strides[i]
    off = np.empty(2 * d, dtype=np.int64)
    for axis in range(d):
        off[2 * axis] = strides[axis]
        off[2 * axis + 1] = -strides[axis]

    lt = np.zeros(nsites, dtype=np.int32)
    ub_pot = np.zeros(nsites * d, dtype=np.int32) if locality == LOC_UBOND else np.zeros(1, dtype=np.int32)
    ob_pot = np.zeros(nsites * 2 * d, dtype=np.int32) if locality == LOC_OBOND else np.zeros(1, dtype=np.int32)
    ub_obs = np.zeros(nsites * d, dtype=np.int32)

    p = len(pat_dirs)
    pos = np.empty(n + 1, dtype=np.int64)
    phis = np.empty(n + 1, dtype=np.float64)
    dirs = np.empty(n + 1, dtype=np.int32)
    adir = np.empty(n + 1, dtype=np.int32)
    matched = np.zeros(n + 1, dtype=np.int32)

    pos[0] = center
    lt[center] = 1
    root_phi = phi[1] if locality == LOC_SITE else 0.0
    if np.isinf(root_phi):
        return
    phis[0] = root_phi
    dirs[0] = 0
    fval = 0

    if n == 0:
        AF[center, 0] += np.exp(-root_phi)
        return

    depth = 0
    while depth >= 0:
        if depth == n or dirs[depth] == 2 * d:
            cur = pos[depth]
            if depth > 0:
                lt[cur] -= 1
                j = adir[depth]
                axis = j >> 1
                base = pos[depth - 1] if (j & 1) == 0 else cur
                bo = base * d + axis
                if obs_kind == OBS_DOUBLED_BONDS and ub_obs[bo] == 2:
                    fval -= 1
                ub_obs[bo] -= 1
                fval -= matched[depth]
                if locality == LOC_UBOND:
                    ub_pot[base * d + axis] -= 1
                elif locality == LOC_OBOND:
                    ob_pot[pos[depth - 1] * 2 * d + j] -= 1
            depth -= 1
            continue
        j = dirs[depth]
        dirs[depth] += 1
        cur = pos[depth]
        nxt = cur + off[j]
        if locality == LOC_SITE:
            c = lt[nxt]
            pv = phi[c + 1]
            if np.isinf(pv):
                continue
            dphi = pv - phi[c]
        elif locality == LOC_UBOND:
            axis = j >> 1
            base = cur if (j & 1) == 0 else nxt
            bidx = base * d + axis
            c = ub_pot[bidx]
            pv = phi[c + 1]
            if np.isinf(pv):
                continue
            dphi = pv - phi[c]
            ub_pot[bidx] += 1
        else:
            bidx = cur * 2 * d + j
            c = ob_pot[bidx]
            pv = phi[c + 1]
            if np.isinf(pv):
                continue
            dphi = pv - phi[c]
            ob_pot[bidx] += 1
        depth += 1
        pos[depth] = nxt
        adir[depth] = j
        dirs[depth] = 0
        phis[depth] = phis[depth - 1] + dphi
        lt[nxt] += 1
        axis = j >> 1
        base = pos[depth - 1] if (j & 1) == 0 else nxt
        bo = base * d + axis
        ub_obs[bo] += 1
        if obs_kind == OBS_DOUBLED_BONDS and ub_obs[bo] == 2:
            fval += 1
        m = 0
        if obs_kind == OBS_PATTERN and depth >= p:
            m = 1
            for t in range(p):
                if adir[depth - p + 1 + t] != pat_dirs[t]:
                    m = 0
                    break
        matched[depth] = m
        fval += m
        if depth == n:
            AF[nxt, fval] += np.exp(-phis[depth])


@njit(cache=True, nogil=True)
def enum_irreducible(d, n_max, phi, locality, in_union, QA, collect, coll_n, coll_code):
    """Enumerate irreducible pieces up to length n_max.

    A piece is a path whose first and last sites are cone points (the
    whole piece lies in the union of their forward and backward cones)
    while no interior site is one.  ``in_union[o]`` answers membership
    of the offset o (grid-encoded difference) in the cone union.

    QA[k, x] accumulates exp(-Phi) over irreducible k-step pieces with
    endpoint x.  With ``collect`` set, the direction word of each piece
    is base-2d packed into coll_code. Returns the number of pieces found.
    """
    side = 2 * n_max + 1
    nsites = 1
    for _ in range(d):
        nsites *= side
    strides = np.empty(d, dtype=np.int64)
    strides[0] = 1
    for i in range(1, d):
        strides[i] = strides[i - 1] * side
    center = 0
    for i in range(d):
        center += n_max * strides[i]
    off = np.empty(2 * d, dtype=np.int64)
    for axis in range(d):
        off[2 * axis] = strides[axis]
        off[2 * axis + 1] = -strides[axis]

    lt = np.zeros(nsites, dtype=np.int32)
    ub = np.zeros(nsites * d, dtype=np.int32) if locality == LOC_UBOND else np.zeros(1, dtype=np.int32)
    ob = np.zeros(nsites * 2 * d, dtype=np.int32) if locality == LOC_OBOND else np.zeros(1, dtype=np.int32)

    pos = np.empty(n_max + 1, dtype=np.int64)
    phis = np.empty(n_max + 1, dtype=np.float64)
    dirs = np.empty(n_max + 1, dtype=np.int32)
    adir = np.empty(n_max + 1, dtype=np.int32)

    alive = np.zeros(n_max + 1, dtype=np.uint8)
    n_alive_interior = 0
    killed = np.empty((n_max + 1) * (n_max + 1), dtype=np.int32)
    killed_top = 0
    killed_cnt = np.zeros(n_max + 1, dtype=np.int32)

    pos[0] = center
    lt[center] = 1
    root_phi = phi[1] if locality == LOC_SITE else 0.0
    if np.isinf(root_phi):
        return 0
    phis[0] = root_phi
    dirs[0] = 0
    alive[0] = 1
    found = 0

    depth = 0
    while depth >= 0:
        if depth == n_max or dirs[depth] == 2 * d:
            cur = pos[depth]
            if depth > 0:
                lt[cur] -= 1
                j = adir[depth]
                if locality == LOC_UBOND:
                    axis = j >> 1
                    base = pos[depth - 1] if (j & 1) == 0 else cur
                    ub[base * d + axis] -= 1
                elif locality == LOC_OBOND:
                    ob[pos[depth - 1] * 2 * d + j] -= 1
                # depth-1 stops being interior first (its alive state at
                # this moment matches what the push counted), then the
                # kills of this depth are rolled back.
                if depth - 1 >= 1 and alive[depth - 1] == 1:
                    n_alive_interior -= 1
                for _ in range(killed_cnt[depth]):
                    killed_top -= 1
                    k = killed[killed_top]
                    alive[k] = 1
                    if 0 < k < depth - 1:
                        n_alive_interior += 1
                killed_cnt[depth] = 0
            depth -= 1
            continue
        j = dirs[depth]
        dirs[depth] += 1
        cur = pos[depth]
        nxt = cur + off[j]
        if locality == LOC_SITE:
            c = lt[nxt]
            pv = phi[c + 1]
            if np.isinf(pv):
                continue
            dphi = pv - phi[c]
        elif locality == LOC_UBOND:
            axis = j >> 1
            base = cur if (j & 1) == 0 else nxt
            bidx = base * d + axis
            c = ub[bidx]
            pv = phi[c + 1]
            if np.isinf(pv):
                continue
            dphi = pv - phi[c]
            ub[bidx] += 1
        else:
            bidx = cur * 2 * d + j
            c = ob[bidx]
            pv = phi[c + 1]
            if np.isinf(pv):
                continue
            dphi = pv - phi[c]
            ob[bidx] += 1
        depth += 1
        pos[depth] = nxt
        adir[depth] = j
        dirs[depth] = 0
        phis[depth] = phis[depth - 1] + dphi
        lt[nxt] += 1

        # cone bookkeeping: new site may kill older cone candidates, and
        # the new index starts alive iff it sees every older site.
        nkilled = 0
        for k in range(depth):
            if alive[k] == 1 and in_union[center + nxt - pos[k]] == 0:
                alive[k] = 0
                killed[killed_top] = k
                killed_top += 1
                nkilled += 1
                if 0 < k < depth - 1:
                    n_alive_interior -= 1
        ok = 1
        for k in range(depth):
            if in_union[center + pos[k] - nxt] == 0:
                ok = 0
                break
        alive[depth] = ok
        killed_cnt[depth] = nkilled
        if depth - 1 >= 1 and alive[depth - 1] == 1:
            n_alive_interior += 1

        if alive[0] == 0:
            # the start can never regain cone-point status: prune.
            lt[nxt] -= 1
            if locality == LOC_UBOND:
                axis = j >> 1
                base = pos[depth - 1] if (j & 1) == 0 else nxt
                ub[base * d + axis] -= 1
            elif locality == LOC_OBOND:
                ob[pos[depth - 1] * 2 * d + j] -= 1
            if depth - 1 >= 1 and alive[depth - 1] == 1:
                n_alive_interior -= 1
            for _ in range(killed_cnt[depth]):
                killed_top -= 1
                k = killed[killed_top]
                alive[k] = 1
                if 0 < k < depth - 1:
                    n_alive_interior += 1
            killed_cnt[depth] = 0
            depth -= 1
            continue

        if alive[depth] == 1 and n_alive_interior == 0:
            QA[depth, nxt] += np.exp(-phis[depth])
            if collect and found < len(coll_n):
                code = 0
                for t in range(depth, 0, -1):
                    code = code * 2 * d + adir[t]
                coll_n[found] = depth
                coll_code[found] = code
            found += 1
    return found


@njit(cache=True, nogil=True)
def _repulsive_trunk(sites_idx, start, stop, xi_grid, center, K, out_idx):
    """Repulsive skeleton of sites_idx[start..stop] rooted at start.

    Writes the path indices of the trunk vertices into out_idx and
    returns their count.  Ball membership: xi(x - u) <= K is inside.
    """
    m = 0
    out_idx[m] = start
    m += 1
    tau = start
    while True:
        u = sites_idx[tau]
        nxt = -1
        for j in range(tau + 1, stop + 1):
            if xi_grid[center + sites_idx[j] - u] > K:
                nxt = j
                break
        if nxt < 0:
            return m
        tau = nxt
        out_idx[m] = tau
        m += 1


@njit(cache=True, nogil=True)
def skeletonize(sites_idx, n, xi_grid, center, K, attractive,
                trunk_idx, hair_idx, hair_owner):
    """Build the K-skeleton of one path given as grid indices.

    Returns (m_trunk_vertices, n_hair_vertices).  trunk_idx receives the
    path indices tau_l of trunk vertices; hair vertices (path indices)
    go to hair_idx with hair_owner mapping each to its trunk slot.
    """
    if not attractive:
        m = _repulsive_trunk(sites_idx, 0, n, xi_grid, center, K, trunk_idx)
        return m, 0

    m = 0
    trunk_idx[m] = 0
    m += 1
    nh = 0
    tau = 0
    scratch = np.empty(n + 2, dtype=np.int64)
    while True:
        u = sites_idx[tau]
        sigma = -1
        for j in range(tau + 1, n + 1):
            if xi_grid[center + sites_idx[j] - u] > K:
                sigma = j
                break
        if sigma < 0:
            return m, nh
        last_in = tau
        for j in range(tau + 1, n + 1):
            if xi_grid[center + sites_idx[j] - u] <= K:
                last_in = j
        if last_in == n:
            # path ends inside the current ball after an excursion:
            # skeletonize the forward tail as a hair rooted at u.
            q = _repulsive_trunk(sites_idx, tau, n, xi_grid, center, K, scratch)
            for t in range(1, q):
                hair_idx[nh] = scratch[t]
                hair_owner[nh] = m - 1
                nh += 1
            return m, nh
        tau_next = last_in + 1
        # hair: the backtrack piece sigma..tau_next reversed, rooted at
        # the new trunk vertex; empty iff it stays in the new ball.
        u_new = sites_idx[tau_next]
        needs_hair = False
        for j in range(sigma, tau_next):
            if xi_grid[center + sites_idx[j] - u_new] > K:
                needs_hair = True
                break
        if needs_hair:
            rev = scratch
            ln = tau_next - sigma
            for t in range(ln + 1):
                rev[t] = sites_idx[tau_next - t]
            hair_out = np.empty(ln + 1, dtype=np.int64)
            q = _repulsive_trunk(rev, 0, ln, xi_grid, center, K, hair_out)
            for t in range(1, q):
                hair_idx[nh] = tau_next - hair_out[t]
                hair_owner[nh] = m
                nh += 1
        trunk_idx[m] = tau_next
        m += 1
        tau = tau_next


@njit(cache=True, nogil=True)
def check_p1_p2(sites_idx, n, xi_grid, center, K, skel_idx, n_skel):
    """Count P1/P2 violations for one path and its skeleton indices.

    skel_idx must be sorted ascending and start at 0.  P2 is checked on
    the portions between consecutive skeleton indices plus the tail
    after the last one.
    """
    viol = 0
    # P1 is structural (vertices are taken from the path); verify anyway.
    for t in range(n_skel):
        if skel_idx[t] < 0 or skel_idx[t] > n:
            viol += 1
    for t in range(n_skel - 1):
        a = skel_idx[t]
        b = skel_idx[t + 1]
        ua = sites_idx[a]
        ub_ = sites_idx[b]
        for j in range(a, b + 1):
            s = sites_idx[j]
            if xi_grid[center + s - ua] > K and xi_grid[center + s - ub_] > K:
                viol += 1
    last = skel_idx[n_skel - 1]
    ul = sites_idx[last]
    for j in range(last, n + 1):
        if xi_grid[center + sites_idx[j] - ul] > K:
            viol += 1
    return viol


@njit(cache=True, nogil=True)
def batch_skeleton_stats(paths_idx, n, xi_grid, center, K, attractive):
    """Skeletonize and P1/P2-check a batch of paths.

    paths_idx: (P, n+1) grid indices.  Returns per-path arrays
    (violations, trunk_steps, hair_steps).
    """
    P = paths_idx.shape[0]
    viol = np.zeros(P, dtype=np.int64)
    msteps = np.zeros(P, dtype=np.int64)
    rsteps = np.zeros(P, dtype=np.int64)
    trunk_idx = np.empty(n + 1, dtype=np.int64)
    hair_idx = np.empty(2 * (n + 1), dtype=np.int64)
    hair_owner = np.empty(2 * (n + 1), dtype=np.int64)
    skel = np.empty(3 * (n + 1), dtype=np.int64)
    for p in range(P):
        row = paths_idx[p]
        m, nh = skeletonize(row, n, xi_grid, center, K, attractive,
                            trunk_idx, hair_idx, hair_owner)
        total = m + nh
        for t in range(m):
            skel[t] = trunk_idx[t]
        for t in range(nh):
            skel[m + t] = hair_idx[t]
        sk = skel[:total]
        sk.sort()
        viol[p] = check_p1_p2(row, n, xi_grid, center, K, sk, total)
        msteps[p] = m - 1
        rsteps[p] = nh
    return viol, msteps, rsteps


@njit(cache=True, nogil=True)
def path_cone_points(sites_idx, n, in_union, center, out_mask):
    """Mark indices k with the whole path inside the k-th double cone."""
    cnt = 0
    for k in range(n + 1):
        base = sites_idx[k]
        ok = 1
        for j in range(n + 1):
            if in_union[center + sites_idx[j] - base] == 0:
                ok = 0
                break
        out_mask[k] = ok
        cnt += ok
    return cnt


@njit(cache=True, nogil=True)
def batch_cone_count(paths_idx, n, in_union, center):
    P = paths_idx.shape[0]
    counts = np.empty(P, dtype=np.int64)
    mask = np.empty(n + 1, dtype=np.uint8)
    for p in range(P):
        counts[p] = path_cone_points(paths_idx[p], n, in_union, center, mask)
    return counts


@njit(cache=True, nogil=True)
def decomposition_residuals(paths_idx, n, in_union, center, phi, locality,
                            d, side, phi1):
    """Weight identity residual of the cone decomposition per path.

    residual = sum(Phi(pieces)) - Phi(gamma) - (#pieces - 1) * phi1,
    with phi1 the site-locality end-point correction (0 for bonds).
    Paths with rejected (infinite) potential report NaN.  Paths whose
    only cone points are the endpoints report residual 0 (single block).
    """
    P = paths_idx.shape[0]
    nsites = 1
    for _ in range(d):
        nsites *= side
    res = np.zeros(P, dtype=np.float64)
    mask = np.empty(n + 1, dtype=np.uint8)
    site_cnt = np.zeros(nsites, dtype=np.int32)
    bond_cnt = np.zeros(nsites * 2 * d, dtype=np.int32)
    strides = np.empty(d, dtype=np.int64)
    strides[0] = 1
    for i in range(1, d):
        strides[i] = strides[i - 1] * side

    for p in range(P):
        row = paths_idx[p]
        path_cone_points(row, n, in_union, center, mask)
        # breakpoints: all cone indices
        total_phi = _segment_phi(row, 0, n, phi, locality, d, strides,
                                 site_cnt, bond_cnt)
        if np.isinf(total_phi):
            res[p] = np.nan
            continue
        acc = 0.0
        npieces = 0
        prev = 0
        bad = False
        for k in range(1, n + 1):
            if mask[k] == 1:
                seg = _segment_phi(row, prev, k, phi, locality, d, strides,
                                   site_cnt, bond_cnt)
                if np.isinf(seg):
                    bad = True
                    break
                acc += seg
                npieces += 1
                prev = k
        if prev != n:
            seg = _segment_phi(row, prev, n, phi, locality, d, strides,
                               site_cnt, bond_cnt)
            if np.isinf(seg):
                bad = True
            else:
                acc += seg
                npieces += 1
        if bad or npieces == 0:
            res[p] = np.nan
            continue
        res[p] = acc - total_phi - (npieces - 1) * phi1
    return res


@njit(cache=True, nogil=True)
def _segment_phi(sites_idx, a, b, phi, locality, d, strides, site_cnt, bond_cnt):
    """Phi of the sub-path [a..b]; scratch arrays are cleaned before return."""
    total = 0.0
    if locality == LOC_SITE:
        for j in range(a, b + 1):
            site_cnt[sites_idx[j]] += 1
        for j in range(a, b + 1):
            s = sites_idx[j]
            c = site_cnt[s]
            if c > 0:
                total += phi[c]
                site_cnt[s] = -c
        for j in range(a, b + 1):
            s = sites_idx[j]
            if site_cnt[s] < 0:
                site_cnt[s] = 0
        return total
    two_d = 2 * d
    for j in range(a, b):
        s0 = sites_idx[j]
        s1 = sites_idx[j + 1]
        diff = s1 - s0
        jdir = -1
        for axis in range(d):
            if diff == strides[axis]:
                jdir = 2 * axis
                break
            if diff == -strides[axis]:
                jdir = 2 * axis + 1
                break
        if locality == LOC_UBOND:
            axis = jdir >> 1
            base = s0 if (jdir & 1) == 0 else s1
            bond_cnt[base * two_d + axis] += 1
        else:
            bond_cnt[s0 * two_d + jdir] += 1
    for j in range(a, b):
        s0 = sites_idx[j]
        s1 = sites_idx[j + 1]
        diff = s1 - s0
        jdir = -1
        for axis in range(d):
            if diff == strides[axis]:
                jdir = 2 * axis
                break
            if diff == -strides[axis]:
                jdir = 2 * axis + 1
                break
        if locality == LOC_UBOND:
            axis = jdir >> 1
            base = s0 if (jdir & 1) == 0 else s1
            key = base * two_d + axis
        else:
            key = s0 * two_d + jdir
        c = bond_cnt[key]
        if c > 0:
            total += phi[c]
            bond_cnt[key] = -c
    for j in range(a, b):
        s0 = sites_idx[j]
        s1 = sites_idx[j + 1]
        diff = s1 - s0
        jdir = -1
        for axis in range(d):
            if diff == strides[axis]:
                jdir = 2 * axis
                break
            if diff == -strides[axis]:
                jdir = 2 * axis + 1
                break
        if locality == LOC_UBOND:
            axis = jdir >> 1
            base = s0 if (jdir & 1) == 0 else s1
            key = base * two_d + axis
        else:
            key = s0 * two_d + jdir
        if bond_cnt[key] < 0:
            bond_cnt[key] = 0
    return total


# ---------------------------------------------------------------------------
# Metropolis chain on fixed-length paths
# ---------------------------------------------------------------------------

MOVE_KINK = 0
MOVE_REGROW = 1
MOVE_PIVOT = 2


@njit(cache=True, nogil=True)
def _site_index(x, strides, n, d):
    idx = 0
    for i in range(d):
        idx += (x[i] + n) * strides[i]
    return idx


@njit(cache=True, nogil=True)
def _count_key(prev_idx, cur_idx, jdir, locality, d):
    """Tally-array key for the arrival at cur via direction jdir."""
    if locality == LOC_SITE:
        return cur_idx
    if locality == LOC_UBOND:
        axis = jdir >> 1
        base = prev_idx if (jdir & 1) == 0 else cur_idx
        return base * 2 * d + axis
    return prev_idx * 2 * d + jdir


@njit(cache=True, nogil=True)
def _dir_of_step(step, d):
    for axis in range(d):
        if step[axis] == 1:
            return 2 * axis
        if step[axis] == -1:
            return 2 * axis + 1
    return -1


@njit(cache=True, nogil=True)
def _apply_delta(counts, key, delta, phi, log_keys, log_deltas, log_top):
    """Update one tally and return (dPhi, new_top, feasible)."""
    c = counts[key]
    nc = c + delta
    pv = phi[nc]
    if np.isinf(pv):
        return 0.0, log_top, False
    counts[key] = nc
    log_keys[log_top] = key
    log_deltas[log_top] = delta
    dphi = pv - phi[c]
    return dphi, log_top + 1, True


@njit(cache=True, nogil=True)
def _undo_log(counts, log_keys, log_deltas, log_top):
    for t in range(log_top - 1, -1, -1):
        counts[log_keys[t]] -= log_deltas[t]


@njit(cache=True, nogil=True)
def retally_path(coords, n, ngrid, d, strides, locality, counts, delta):
    """Add +-1 to the tally of every visit (or bond) of the path."""
    if locality == LOC_SITE:
        for j in range(n + 1):
            counts[_site_index(coords[j], strides, ngrid, d)] += delta
    else:
        for j in range(n):
            prev = _site_index(coords[j], strides, ngrid, d)
            cur = _site_index(coords[j + 1], strides, ngrid, d)
            jdir = _dir_of_step(coords[j + 1] - coords[j], d)
            counts[_count_key(prev, cur, jdir, locality, d)] += delta


@njit(cache=True, nogil=True)
def potential_from_counts(counts, phi):
    total = 0.0
    for k in range(len(counts)):
        c = counts[k]
        if c > 0:
            total += phi[c]
    return total


@njit(cache=True, nogil=True)
def mcmc_chunk(coords, counts, phi_state, d, n, ngrid, phi, locality, h,
               n_sweeps, mix_cdf, kmax, syms, uniforms,
               acc, prop, scratch_new, log_keys, log_deltas):
    """Run n_sweeps Metropolis sweeps (n proposals each) in place.

    uniforms has shape (n_sweeps * n, 8); mix_cdf is the cumulative move
    mix (kink, regrow, pivot).  Proposals are symmetric by construction;
    hard-core rejections short-circuit before any inf arithmetic.
    phi_state[0] carries Phi(gamma); acc/prop count per move kind.
    """
    strides = np.empty(d, dtype=np.int64)
    side = 2 * ngrid + 1
    strides[0] = 1
    for i in range(1, d):
        strides[i] = strides[i - 1] * side
    nsym = syms.shape[0]
    u_row = 0
    for sweep in range(n_sweeps):
        for _m in range(n):
            u = uniforms[u_row]
            u_row += 1
            mv = 0
            if u[0] >= mix_cdf[0]:
                mv = 1 if u[0] < mix_cdf[1] else 2
            prop[mv] += 1
            log_top = 0
            dphi = 0.0
            dh = 0.0
            ok = True
            changed_lo = 0
            changed_hi = -1
            if mv == MOVE_KINK:
                if n < 2:
                    continue
                i = 1 + int(u[1] * (n - 1))
                if i > n - 1:
                    i = n - 1
                a = coords[i - 1]
                b = coords[i + 1]
                old = coords[i]
                new = scratch_new[0]
                diff0 = 0
                for t in range(d):
                    diff0 += (b[t] - a[t]) * (b[t] - a[t])
                if diff0 == 0:
                    j = int(u[2] * 2 * d)
                    if j > 2 * d - 1:
                        j = 2 * d - 1
                    for t in range(d):
                        new[t] = a[t]
                    axis = j >> 1
                    new[axis] += 1 if (j & 1) == 0 else -1
                elif diff0 == 2:
                    for t in range(d):
                        new[t] = a[t] + b[t] - old[t]
                else:
                    continue  # straight segment: no kink proposal
                same = True
                for t in range(d):
                    if new[t] != old[t]:
                        same = False
                        break
                if same:
                    continue
                # remove old middle visit / bonds, add new
                if locality == LOC_SITE:
                    dp, log_top, ok = _apply_delta(
                        counts, _site_index(old, strides, ngrid, d), -1, phi,
                        log_keys, log_deltas, log_top)
                    dphi += dp
                    if ok:
                        dp, log_top, ok = _apply_delta(
                            counts, _site_index(new, strides, ngrid, d), 1, phi,
                            log_keys, log_deltas, log_top)
                        dphi += dp
                else:
                    ia = _site_index(a, strides, ngrid, d)
                    ib = _site_index(b, strides, ngrid, d)
                    io = _site_index(old, strides, ngrid, d)
                    inw = _site_index(new, strides, ngrid, d)
                    jd1 = _dir_of_step(old - a, d)
                    jd2 = _dir_of_step(b - old, d)
                    jd3 = _dir_of_step(new - a, d)
                    jd4 = _dir_of_step(b - new, d)
                    dp, log_top, ok = _apply_delta(
                        counts, _count_key(ia, io, jd1, locality, d), -1, phi,
                        log_keys, log_deltas, log_top)
                    dphi += dp
                    if ok:
                        dp, log_top, ok = _apply_delta(
                            counts, _count_key(io, ib, jd2, locality, d), -1,
                            phi, log_keys, log_deltas, log_top)
                        dphi += dp
                    if ok:
                        dp, log_top, ok = _apply_delta(
                            counts, _count_key(ia, inw, jd3, locality, d), 1,
                            phi, log_keys, log_deltas, log_top)
                        dphi += dp
                    if ok:
                        dp, log_top, ok = _apply_delta(
                            counts, _count_key(inw, ib, jd4, locality, d), 1,
                            phi, log_keys, log_deltas, log_top)
                        dphi += dp
                if not ok:
                    _undo_log(counts, log_keys, log_deltas, log_top)
                    continue
                if u[7] < np.exp(min(0.0, -dphi)):
                    coords[i] = new
                    phi_state[0] += dphi
                    acc[mv] += 1
                else:
                    _undo_log(counts, log_keys, log_deltas, log_top)
                continue

            if mv == MOVE_REGROW:
                k = 1 + int(u[2] * kmax)
                if k > kmax:
                    k = kmax
                if k > n:
                    k = n
                tail = u[1] < 0.5
                news = scratch_new
                if tail:
                    base = coords[n - k]
                    for t in range(d):
                        news[0][t] = base[t]
                    for s in range(k):
                        j = int(u[3 + s] * 2 * d)
                        if j > 2 * d - 1:
                            j = 2 * d - 1
                        axis = j >> 1
                        for t in range(d):
                            news[s + 1][t] = news[s][t]
                        news[s + 1][axis] += 1 if (j & 1) == 0 else -1
                    changed_lo = n - k + 1
                    changed_hi = n
                else:
                    base = coords[k]
                    for t in range(d):
                        news[k][t] = base[t]
                    for s in range(k):
                        j = int(u[3 + s] * 2 * d)
                        if j > 2 * d - 1:
                            j = 2 * d - 1
                        axis = j >> 1
                        for t in range(d):
                            news[k - 1 - s][t] = news[k - s][t]
                        news[k - 1 - s][axis] += 1 if (j & 1) == 0 else -1
                    changed_lo = 0
                    changed_hi = k - 1
                # remove old segment contributions
                if locality == LOC_SITE:
                    for j in range(changed_lo, changed_hi + 1):
                        dp, log_top, ok = _apply_delta(
                            counts, _site_index(coords[j], strides, ngrid, d), -1,
                            phi, log_keys, log_deltas, log_top)
                        dphi += dp
                        if not ok:
                            break
                    if ok:
                        for s in range(k):
                            row = news[s + 1] if tail else news[s]
                            dp, log_top, ok = _apply_delta(
                                counts, _site_index(row, strides, ngrid, d), 1,
                                phi, log_keys, log_deltas, log_top)
                            dphi += dp
                            if not ok:
                                break
                else:
                    lo_b = n - k if tail else 0
                    hi_b = n - 1 if tail else k - 1
                    for j in range(lo_b, hi_b + 1):
                        ip = _site_index(coords[j], strides, ngrid, d)
                        ic = _site_index(coords[j + 1], strides, ngrid, d)
                        jd = _dir_of_step(coords[j + 1] - coords[j], d)
                        dp, log_top, ok = _apply_delta(
                            counts, _count_key(ip, ic, jd, locality, d), -1,
                            phi, log_keys, log_deltas, log_top)
                        dphi += dp
                        if not ok:
                            break
                    if ok:
                        for s in range(k):
                            ip = _site_index(news[s], strides, ngrid, d)
                            ic = _site_index(news[s + 1], strides, ngrid, d)
                            jd = _dir_of_step(news[s + 1] - news[s], d)
                            dp, log_top, ok = _apply_delta(
                                counts, _count_key(ip, ic, jd, locality, d), 1,
                                phi, log_keys, log_deltas, log_top)
                            dphi += dp
                            if not ok:
                                break
                if not ok:
                    _undo_log(counts, log_keys, log_deltas, log_top)
                    continue
                if tail:
                    for t in range(d):
                        dh += h[t] * (news[k][t] - coords[n][t])
                else:
                    for t in range(d):
                        dh += h[t] * (coords[0][t] - news[0][t])
                if u[7] < np.exp(min(0.0, -dphi + dh)):
                    if tail:
                        for s in range(k):
                            coords[n - k + 1 + s] = news[s + 1]
                    else:
                        for s in range(k):
                            coords[s] = news[s]
                        # re-root at the origin: tally keys shift with the
                        # translation, so untally, translate, retally (O(n)).
                        shift = scratch_new[n + 1]
                        nonzero = False
                        for t in range(d):
                            shift[t] = coords[0][t]
                            if shift[t] != 0:
                                nonzero = True
                        if nonzero:
                            retally_path(coords, n, ngrid, d, strides, locality, counts, -1)
                            for j in range(n + 1):
                                for t in range(d):
                                    coords[j][t] -= shift[t]
                            retally_path(coords, n, ngrid, d, strides, locality, counts, 1)
                    phi_state[0] += dphi
                    acc[mv] += 1
                else:
                    _undo_log(counts, log_keys, log_deltas, log_top)
                continue

            # pivot
            i = int(u[1] * n)
            if i > n - 1:
                i = n - 1
            s_idx = int(u[2] * nsym)
            if s_idx > nsym - 1:
                s_idx = nsym - 1
            M = syms[s_idx]
            piv = coords[i]
            identity = True
            for j in range(i + 1, n + 1):
                row = scratch_new[j - i]
                for t in range(d):
                    v = piv[t]
                    for t2 in range(d):
                        v += M[t, t2] * (coords[j][t2] - piv[t2])
                    row[t] = v
                if identity:
                    for t in range(d):
                        if row[t] != coords[j][t]:
                            identity = False
                            break
            if identity:
                continue
            if locality == LOC_SITE:
                for j in range(i + 1, n + 1):
                    dp, log_top, ok = _apply_delta(
                        counts, _site_index(coords[j], strides, ngrid, d), -1,
                        phi, log_keys, log_deltas, log_top)
                    dphi += dp
                    if not ok:
                        break
                if ok:
                    for j in range(i + 1, n + 1):
                        dp, log_top, ok = _apply_delta(
                            counts, _site_index(scratch_new[j - i], strides, ngrid, d),
                            1, phi, log_keys, log_deltas, log_top)
                        dphi += dp
                        if not ok:
                            break
            else:
                for j in range(i, n):
                    ip = _site_index(coords[j], strides, ngrid, d)
                    ic = _site_index(coords[j + 1], strides, ngrid, d)
                    jd = _dir_of_step(coords[j + 1] - coords[j], d)
                    dp, log_top, ok = _apply_delta(
                        counts, _count_key(ip, ic, jd, locality, d), -1, phi,
                        log_keys, log_deltas, log_top)
                    dphi += dp
                    if not ok:
                        break
                if ok:
                    prev = coords[i]
                    for j in range(i, n):
                        cur = scratch_new[j + 1 - i]
                        p_row = prev if j == i else scratch_new[j - i]
                        ip = _site_index(p_row, strides, ngrid, d)
                        ic = _site_index(cur, strides, ngrid, d)
                        jd = _dir_of_step(cur - p_row, d)
                        dp, log_top, ok = _apply_delta(
                            counts, _count_key(ip, ic, jd, locality, d), 1,
                            phi, log_keys, log_deltas, log_top)
                        dphi += dp
                        if not ok:
                            break
            if not ok:
                _undo_log(counts, log_keys, log_deltas, log_top)
                continue
            for t in range(d):
                dh += h[t] * (scratch_new[n - i][t] - coords[n][t])
            if u[7] < np.exp(min(0.0, -dphi + dh)):
                for j in range(i + 1, n + 1):
                    coords[j] = scratch_new[j - i]
                phi_state[0] += dphi
                acc[mv] += 1
            else:
                _undo_log(counts, log_keys, log_deltas, log_top)
    return u_row
