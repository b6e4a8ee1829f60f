"""Time the compiled kernels against their pure-numpy fallbacks.

Builds one synthetic collaboration graph and one point cloud, then runs
every dual-path kernel in ``knowex._kernels`` through both
implementations on identical inputs.  Reports best-of-``--repeat`` wall
times and the speedup, and checks that the two paths agree to
floating-point roundoff.  Run with ``KNOWEX_DISABLE_NUMBA=1`` to confirm
the fallback is what you are timing in production.

    python benchmarks/bench_kernels.py --nodes 20000 --degree 6
"""

import argparse
import time

import numpy as np

from knowex import _kernels


def random_csr(rng, n_nodes, degree):
    """Undirected CSR adjacency with the given mean degree."""
    n_edges = n_nodes * degree // 2
    a = rng.integers(0, n_nodes, size=n_edges)
    b = rng.integers(0, n_nodes, size=n_edges)
    keep = a != b
    pairs = np.unique(
        np.stack([np.minimum(a[keep], b[keep]), np.maximum(a[keep], b[keep])]), axis=1
    )
    heads = np.concatenate([pairs[0], pairs[1]])
    tails = np.concatenate([pairs[1], pairs[0]])
    order = np.lexsort((tails, heads))
    heads, tails = heads[order], tails[order]
    indptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.add.at(indptr, heads + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, tails.astype(np.int64)


def best_of(func, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        func()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(name, nb_func, py_func, check, repeat):
    if nb_func is not None:
        nb_func()  # first call pays the JIT compile
        t_nb = best_of(nb_func, repeat)
    else:
        t_nb = None
    t_py = best_of(py_func, repeat)
    check()
    if t_nb is None:
        print(f"{name:<22} numba     -      numpy {t_py * 1e3:9.2f} ms")
    else:
        print(
            f"{name:<22} numba {t_nb * 1e3:9.2f} ms  numpy {t_py * 1e3:9.2f} ms  "
            f"speedup {t_py / t_nb:6.1f}x"
        )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=20000)
    ap.add_argument("--degree", type=int, default=6)
    ap.add_argument("--sources", type=int, default=2000)
    ap.add_argument("--depth", type=int, default=6)
    ap.add_argument("--points", type=int, default=40000)
    ap.add_argument("--queries", type=int, default=4000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    indptr, indices = random_csr(rng, args.nodes, args.degree)
    sources = rng.choice(args.nodes, size=min(args.sources, args.nodes), replace=False)
    sources = np.sort(sources).astype(np.int64)
    values = rng.lognormal(0.0, 0.5, size=args.nodes)
    scopes = rng.integers(0, 2**63, size=(args.nodes, 4), dtype=np.int64).astype(np.uint64)

    plat = rng.uniform(30.0, 40.0, size=args.points)
    plon = rng.uniform(130.0, 140.0, size=args.points)
    order = np.argsort(plat, kind="stable")
    plat, plon = plat[order], plon[order]
    weights = rng.uniform(0.0, 5.0, size=args.points)
    qlat = rng.uniform(30.0, 40.0, size=args.queries)
    qlon = rng.uniform(130.0, 140.0, size=args.queries)
    radius = 15.0
    band = radius / 111.19
    lo = np.searchsorted(plat, qlat - band).astype(np.int64)
    hi = np.searchsorted(plat, qlat + band).astype(np.int64)

    print(
        f"graph: {args.nodes} nodes, mean degree {args.degree}, "
        f"{len(sources)} sources, depth {args.depth}; "
        f"points: {args.points}, queries {args.queries}"
    )
    if not _kernels.HAS_NUMBA:
        print("numba path disabled or unavailable; timing the numpy fallback only")

    has = _kernels.HAS_NUMBA

    def check_value():
        s1, c1 = _kernels._hop_value_stats_py(indptr, indices, sources, values, args.depth)
        if has:
            s2, c2 = _kernels._hop_value_stats_nb(indptr, indices, sources, values, args.depth)
            assert np.array_equal(c1, c2)
            assert np.allclose(s1, s2, rtol=1e-12, atol=0.0)

    def check_jaccard():
        j1, c1, n1 = _kernels._hop_jaccard_stats_py(indptr, indices, sources, scopes, args.depth)
        if has:
            j2, c2, n2 = _kernels._hop_jaccard_stats_nb(
                indptr, indices, sources, scopes, args.depth
            )
            assert np.array_equal(n1, n2)
            assert np.allclose(j1, j2, rtol=1e-12, atol=1e-12)
            assert np.allclose(c1, c2, rtol=1e-12, atol=0.0)

    def check_radius():
        r1 = _kernels._radius_scan_py(qlat, qlon, plat, plon, weights, lo, hi, radius)
        if has:
            r2 = _kernels._radius_scan_nb(qlat, qlon, plat, plon, weights, lo, hi, radius)
            assert np.allclose(r1, r2, rtol=1e-12, atol=1e-12)

    def check_nearest():
        b1, d1 = _kernels._nearest_scan_py(qlat, qlon, plat, plon, lo, hi)
        if has:
            b2, d2 = _kernels._nearest_scan_nb(qlat, qlon, plat, plon, lo, hi)
            assert np.array_equal(b1, b2)
            assert np.allclose(d1, d2, rtol=1e-12, atol=1e-12)

    bench(
        "hop_value_stats",
        (lambda: _kernels._hop_value_stats_nb(indptr, indices, sources, values, args.depth))
        if has
        else None,
        lambda: _kernels._hop_value_stats_py(indptr, indices, sources, values, args.depth),
        check_value,
        args.repeat,
    )
    bench(
        "hop_jaccard_stats",
        (lambda: _kernels._hop_jaccard_stats_nb(indptr, indices, sources, scopes, args.depth))
        if has
        else None,
        lambda: _kernels._hop_jaccard_stats_py(indptr, indices, sources, scopes, args.depth),
        check_jaccard,
        args.repeat,
    )
    bench(
        "radius_weight_sums",
        (lambda: _kernels._radius_scan_nb(qlat, qlon, plat, plon, weights, lo, hi, radius))
        if has
        else None,
        lambda: _kernels._radius_scan_py(qlat, qlon, plat, plon, weights, lo, hi, radius),
        check_radius,
        args.repeat,
    )
    bench(
        "nearest_in_band",
        (lambda: _kernels._nearest_scan_nb(qlat, qlon, plat, plon, lo, hi)) if has else None,
        lambda: _kernels._nearest_scan_py(qlat, qlon, plat, plon, lo, hi),
        check_nearest,
        args.repeat,
    )


if __name__ == "__main__":
    main()
