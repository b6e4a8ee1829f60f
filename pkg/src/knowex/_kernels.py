"""Hot numeric kernels with two interchangeable implementations.

Every kernel exists twice: a serial loop compiled with numba's ``@njit``
and a vectorized pure-numpy fallback.  The active path is chosen once at
import time: if numba is importable and the environment variable
``KNOWEX_DISABLE_NUMBA`` is unset (or not ``"1"``), the compiled path is
used; otherwise the numpy path.  Both paths implement the same
specification and agree to floating-point roundoff (not bitwise: the
numpy path uses pairwise summation).  ``benchmarks/bench_kernels.py``
times one against the other.

Graphs enter as CSR adjacency (``indptr``, ``indices``) over dense node
indices 0..n-1.  The compiled breadth-first kernels accumulate in
discovery order, which is a pure function of the CSR arrays (graph
construction sorts adjacency lists, so the order is canonical); the
numpy path accumulates in ascending node order.  The two paths
therefore differ only in floating-point summation order.

``KNOWEX_THREADS`` caps the numba threading layer; kernels here are
serial per source, so the setting only matters for callers that batch
sources through ``numba.prange`` wrappers of their own.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("KNOWEX_DISABLE_NUMBA", "0") == "1"

try:
    if _DISABLED:
        raise ImportError("numba disabled by KNOWEX_DISABLE_NUMBA")
    from numba import njit, set_num_threads

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def njit(*args, **kwargs):  # pragma: no cover - trivial shim
        def wrap(func):
            return func

        if args and callable(args[0]):
            return args[0]
        return wrap


if HAS_NUMBA and "KNOWEX_THREADS" in os.environ:
    try:
        set_num_threads(max(1, int(os.environ["KNOWEX_THREADS"])))
    except ValueError:
        pass


# ---------------------------------------------------------------------------
# ragged gather: neighbors of a node block, used by the numpy BFS path


def _neighbor_block(indptr: np.ndarray, indices: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    starts = indptr[nodes]
    counts = indptr[nodes + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=indices.dtype)
    # classic ragged-range construction: for each node lay out
    # start, start+1, ..., start+count-1 without a python loop
    offsets = np.repeat(starts - np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
    return indices[offsets + np.arange(total)]


# ---------------------------------------------------------------------------
# frontier value statistics: per-source sums/counts of a node value over
# the set of nodes at exact graph distance d, d = 1..max_depth


def _hop_value_stats_py(indptr, indices, sources, values, max_depth):
    n = indptr.shape[0] - 1
    ns = sources.shape[0]
    sums = np.zeros((ns, max_depth), dtype=np.float64)
    counts = np.zeros((ns, max_depth), dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    for s in range(ns):
        src = sources[s]
        seen[src] = True
        frontier = np.array([src], dtype=indices.dtype)
        visited = [src]
        for d in range(1, max_depth + 1):
            neigh = _neighbor_block(indptr, indices, frontier)
            if neigh.size == 0:
                break
            fresh = neigh[~seen[neigh]]
            if fresh.size == 0:
                break
            frontier = np.unique(fresh)
            seen[frontier] = True
            visited.extend(frontier.tolist())
            vals = values[frontier]
            ok = np.isfinite(vals)
            sums[s, d - 1] = vals[ok].sum()
            counts[s, d - 1] = int(ok.sum())
        seen[np.asarray(visited, dtype=np.int64)] = False
    return sums, counts


@njit(cache=True)
def _hop_value_stats_nb(indptr, indices, sources, values, max_depth):  # pragma: no cover
    n = indptr.shape[0] - 1
    ns = sources.shape[0]
    sums = np.zeros((ns, max_depth), dtype=np.float64)
    counts = np.zeros((ns, max_depth), dtype=np.int64)
    mark = np.full(n, -1, dtype=np.int64)
    frontier = np.empty(n, dtype=np.int64)
    nxt = np.empty(n, dtype=np.int64)
    for s in range(ns):
        src = sources[s]
        mark[src] = s
        frontier[0] = src
        flen = 1
        for d in range(1, max_depth + 1):
            nlen = 0
            acc = 0.0
            cnt = 0
            for fi in range(flen):
                u = frontier[fi]
                for p in range(indptr[u], indptr[u + 1]):
                    v = indices[p]
                    if mark[v] != s:
                        mark[v] = s
                        nxt[nlen] = v
                        nlen += 1
                        val = values[v]
                        if np.isfinite(val):
                            acc += val
                            cnt += 1
            if nlen == 0:
                break
            sums[s, d - 1] = acc
            counts[s, d - 1] = cnt
            frontier, nxt = nxt, frontier
            flen = nlen
    return sums, counts


def hop_value_stats(
    indptr: np.ndarray,
    indices: np.ndarray,
    sources: np.ndarray,
    values: np.ndarray,
    max_depth: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Sum and count a node value over exact-distance frontiers.

    Parameters
    ----------
    indptr, indices : int64 arrays
        CSR adjacency of an undirected graph.
    sources : int64 array
        Node indices to run breadth-first search from.
    values : float64 array
        One value per node; non-finite entries are skipped and do not
        count toward the frontier denominator.
    max_depth : int
        Largest graph distance to expand to.

    Returns
    -------
    sums, counts : (len(sources), max_depth) arrays
        ``sums[s, d-1]`` is the sum of ``values`` over nodes at exact
        distance ``d`` from ``sources[s]``; ``counts`` the number of
        finite values found there.
    """
    indptr = np.ascontiguousarray(indptr, dtype=np.int64)
    indices = np.ascontiguousarray(indices, dtype=np.int64)
    sources = np.ascontiguousarray(sources, dtype=np.int64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    if HAS_NUMBA:
        return _hop_value_stats_nb(indptr, indices, sources, values, max_depth)
    return _hop_value_stats_py(indptr, indices, sources, values, max_depth)


# ---------------------------------------------------------------------------
# frontier scope-overlap statistics: Jaccard similarity of category
# bitsets between the source and nodes at exact distance d


def _popcount_np(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words)


def _hop_jaccard_stats_py(indptr, indices, sources, scopes, max_depth):
    n = indptr.shape[0] - 1
    ns = sources.shape[0]
    jsum = np.zeros((ns, max_depth), dtype=np.float64)
    csum = np.zeros((ns, max_depth), dtype=np.float64)
    counts = np.zeros((ns, max_depth), dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    for s in range(ns):
        src = sources[s]
        own = scopes[src]
        seen[src] = True
        frontier = np.array([src], dtype=indices.dtype)
        visited = [src]
        for d in range(1, max_depth + 1):
            neigh = _neighbor_block(indptr, indices, frontier)
            if neigh.size == 0:
                break
            fresh = neigh[~seen[neigh]]
            if fresh.size == 0:
                break
            frontier = np.unique(fresh)
            seen[frontier] = True
            visited.extend(frontier.tolist())
            others = scopes[frontier]
            inter = _popcount_np(others & own).sum(axis=1).astype(np.float64)
            union = _popcount_np(others | own).sum(axis=1).astype(np.float64)
            ok = union > 0
            jsum[s, d - 1] = (inter[ok] / union[ok]).sum()
            csum[s, d - 1] = inter[ok].sum()
            counts[s, d - 1] = int(ok.sum())
        seen[np.asarray(visited, dtype=np.int64)] = False
    return jsum, csum, counts


@njit(cache=True)
def _popcount64(x):  # pragma: no cover
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@njit(cache=True)
def _hop_jaccard_stats_nb(indptr, indices, sources, scopes, max_depth):  # pragma: no cover
    n = indptr.shape[0] - 1
    ns = sources.shape[0]
    nw = scopes.shape[1]
    jsum = np.zeros((ns, max_depth), dtype=np.float64)
    csum = np.zeros((ns, max_depth), dtype=np.float64)
    counts = np.zeros((ns, max_depth), dtype=np.int64)
    mark = np.full(n, -1, dtype=np.int64)
    frontier = np.empty(n, dtype=np.int64)
    nxt = np.empty(n, dtype=np.int64)
    for s in range(ns):
        src = sources[s]
        mark[src] = s
        frontier[0] = src
        flen = 1
        for d in range(1, max_depth + 1):
            nlen = 0
            jacc = 0.0
            comm = 0.0
            cnt = 0
            for fi in range(flen):
                u = frontier[fi]
                for p in range(indptr[u], indptr[u + 1]):
                    v = indices[p]
                    if mark[v] != s:
                        mark[v] = s
                        nxt[nlen] = v
                        nlen += 1
                        inter = np.uint64(0)
                        union = np.uint64(0)
                        for w in range(nw):
                            inter += _popcount64(scopes[src, w] & scopes[v, w])
                            union += _popcount64(scopes[src, w] | scopes[v, w])
                        if union > np.uint64(0):
                            jacc += float(inter) / float(union)
                            comm += float(inter)
                            cnt += 1
            if nlen == 0:
                break
            jsum[s, d - 1] = jacc
            csum[s, d - 1] = comm
            counts[s, d - 1] = cnt
            frontier, nxt = nxt, frontier
            flen = nlen
    return jsum, csum, counts


def hop_jaccard_stats(
    indptr: np.ndarray,
    indices: np.ndarray,
    sources: np.ndarray,
    scopes: np.ndarray,
    max_depth: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Accumulate scope overlap between sources and distance-d frontiers.

    ``scopes`` is an (n_nodes, n_words) uint64 bitset matrix; bit b of
    word w marks membership of category ``64*w + b``.  For each source
    and each exact distance d the kernel sums the Jaccard similarity
    ``|S_i & S_j| / |S_i | S_j|`` and the raw intersection size over
    frontier members j, skipping pairs whose union is empty.

    Returns
    -------
    jaccard_sums, common_sums, counts : (len(sources), max_depth) arrays
    """
    indptr = np.ascontiguousarray(indptr, dtype=np.int64)
    indices = np.ascontiguousarray(indices, dtype=np.int64)
    sources = np.ascontiguousarray(sources, dtype=np.int64)
    scopes = np.ascontiguousarray(scopes, dtype=np.uint64)
    if HAS_NUMBA:
        return _hop_jaccard_stats_nb(indptr, indices, sources, scopes, max_depth)
    return _hop_jaccard_stats_py(indptr, indices, sources, scopes, max_depth)


# ---------------------------------------------------------------------------
# great-circle distance and banded radius scans

EARTH_RADIUS_KM = 6371.0088


def _haversine_np(lat1, lon1, lat2, lon2):
    la1, lo1, la2, lo2 = map(np.radians, (lat1, lon1, lat2, lon2))
    h = np.sin((la2 - la1) / 2.0) ** 2 + np.cos(la1) * np.cos(la2) * np.sin((lo2 - lo1) / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.minimum(h, 1.0)))


@njit(cache=True)
def _radius_scan_nb(qlat, qlon, plat, plon, weights, lo, hi, radius_km):  # pragma: no cover
    nq = qlat.shape[0]
    out = np.zeros(nq, dtype=np.float64)
    r2 = radius_km
    for q in range(nq):
        la1 = np.radians(qlat[q])
        lo1 = np.radians(qlon[q])
        c1 = np.cos(la1)
        acc = 0.0
        for p in range(lo[q], hi[q]):
            la2 = np.radians(plat[p])
            lo2 = np.radians(plon[p])
            sdlat = np.sin((la2 - la1) / 2.0)
            sdlon = np.sin((lo2 - lo1) / 2.0)
            h = sdlat * sdlat + c1 * np.cos(la2) * sdlon * sdlon
            if h > 1.0:
                h = 1.0
            d = 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(h))
            if d < r2:
                acc += weights[p]
        out[q] = acc
    return out


def _radius_scan_py(qlat, qlon, plat, plon, weights, lo, hi, radius_km):
    nq = qlat.shape[0]
    out = np.zeros(nq, dtype=np.float64)
    for q in range(nq):
        sl = slice(lo[q], hi[q])
        if sl.start >= sl.stop:
            continue
        d = _haversine_np(qlat[q], qlon[q], plat[sl], plon[sl])
        out[q] = weights[sl][d < radius_km].sum()
    return out


def radius_weight_sums(
    qlat: np.ndarray,
    qlon: np.ndarray,
    plat: np.ndarray,
    plon: np.ndarray,
    weights: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    radius_km: float,
) -> np.ndarray:
    """Sum point weights strictly inside ``radius_km`` of each query.

    Points must be pre-sorted however the caller likes; ``lo``/``hi``
    give, per query, the candidate slice to scan (a latitude band from
    the spatial index).  The strict ``<`` comparison is deliberate.
    """
    args = [np.ascontiguousarray(a, dtype=np.float64) for a in (qlat, qlon, plat, plon, weights)]
    lo = np.ascontiguousarray(lo, dtype=np.int64)
    hi = np.ascontiguousarray(hi, dtype=np.int64)
    if HAS_NUMBA:
        return _radius_scan_nb(*args, lo, hi, float(radius_km))
    return _radius_scan_py(*args, lo, hi, float(radius_km))


@njit(cache=True)
def _nearest_scan_nb(qlat, qlon, plat, plon, lo, hi):  # pragma: no cover
    nq = qlat.shape[0]
    best = np.full(nq, -1, dtype=np.int64)
    dist = np.full(nq, np.inf, dtype=np.float64)
    for q in range(nq):
        la1 = np.radians(qlat[q])
        lo1 = np.radians(qlon[q])
        c1 = np.cos(la1)
        for p in range(lo[q], hi[q]):
            la2 = np.radians(plat[p])
            lo2 = np.radians(plon[p])
            sdlat = np.sin((la2 - la1) / 2.0)
            sdlon = np.sin((lo2 - lo1) / 2.0)
            h = sdlat * sdlat + c1 * np.cos(la2) * sdlon * sdlon
            if h > 1.0:
                h = 1.0
            d = 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(h))
            if d < dist[q]:
                dist[q] = d
                best[q] = p
    return best, dist


def _nearest_scan_py(qlat, qlon, plat, plon, lo, hi):
    nq = qlat.shape[0]
    best = np.full(nq, -1, dtype=np.int64)
    dist = np.full(nq, np.inf, dtype=np.float64)
    for q in range(nq):
        sl = slice(lo[q], hi[q])
        if sl.start >= sl.stop:
            continue
        d = _haversine_np(qlat[q], qlon[q], plat[sl], plon[sl])
        k = int(np.argmin(d))
        best[q] = sl.start + k
        dist[q] = d[k]
    return best, dist


def nearest_in_band(
    qlat: np.ndarray,
    qlon: np.ndarray,
    plat: np.ndarray,
    plon: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Nearest candidate point (index and distance) per query.

    Candidates are the ``lo[q]:hi[q]`` slice per query; an empty slice
    yields index -1 and infinite distance.  Ties resolve to the lowest
    candidate position in both paths.
    """
    args = [np.ascontiguousarray(a, dtype=np.float64) for a in (qlat, qlon, plat, plon)]
    lo = np.ascontiguousarray(lo, dtype=np.int64)
    hi = np.ascontiguousarray(hi, dtype=np.int64)
    if HAS_NUMBA:
        return _nearest_scan_nb(*args, lo, hi)
    return _nearest_scan_py(*args, lo, hi)
