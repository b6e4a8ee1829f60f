"""End-to-end acceptance gate.

Every test prints one summary line outside pytest capture, so a full
run reads as a checklist.  Cheap checks run first; the Monte Carlo
recovery block at the bottom dominates the runtime because it builds
and fits two hundred economies of five thousand inventors each.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from knowex.bfmodel import BfParams, simulate_rotation, steady_state_share, steady_state_size
from knowex.counterfactual import (
    _exclusion_set,
    _fd_slope,
    _firm_pools,
    build_constraints,
    draw_replacements,
    run_ensemble,
)
from knowex.estimator import mop_critical_value, tsls_fit
from knowex.graph import CollaborationGraph, hop_frontiers, shell_value_means
from knowex.measures import (
    build_vocab,
    firm_covariates,
    novelty_values,
    period_measures,
    scope_table,
)
from knowex.pipeline import (
    PipelineConfig,
    build_panel,
    counterfactual_inputs,
    estimate_panel,
    overlap_profile_table,
    run_pipeline,
)
from knowex.simulate import SimConfig, export_economy, generate

from conftest import adjacency_matrix, day, shells_by_matrix_power
from test_measures import brute_force_measures, random_fixture

PIPE = dict(patents="memory", inventors="memory", cluster_level="firm")

_CAPTURE = None


@pytest.fixture(autouse=True, scope="module")
def _checklist(request):
    global _CAPTURE
    _CAPTURE = request.config.pluginmanager.getplugin("capturemanager")
    yield


def _report(tag: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}"
    if _CAPTURE is not None:
        with _CAPTURE.global_and_fixture_disabled():
            print(line, flush=True)
    else:
        print(line, flush=True)


# ---------------------------------------------------------------------------
# network shells and instrument means against brute-force oracles


def test_network_oracle_equivalence():
    rng = np.random.default_rng(123)
    t0 = time.perf_counter()
    mismatches = 0
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 51))
        p = float(rng.uniform(0.02, 0.5))
        ids = [f"N{k:03d}" for k in range(n)]
        iu = np.triu_indices(n, 1)
        mask = rng.random(len(iu[0])) < p
        edges = {(ids[a], ids[b]) for a, b in zip(iu[0][mask], iu[1][mask])}
        graph = CollaborationGraph.from_edges(ids, edges)
        adj = adjacency_matrix(graph)
        values = rng.uniform(0.5, 2.0, size=n)
        means = shell_value_means(graph, np.arange(n), values, [1, 2, 3])
        for src in range(n):
            want = shells_by_matrix_power(adj, src, 3)
            got = hop_frontiers(graph, src, 3)
            for order in range(4):
                if sorted(got[order].tolist()) != sorted(want[order]):
                    mismatches += 1
            for order in (1, 2, 3):
                shell = want[order]
                if shell:
                    oracle = float(np.mean(values[sorted(shell)]))
                    worst = max(worst, abs(means[order][0][src] - oracle) / oracle)
                elif not np.isnan(means[order][0][src]):
                    mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and worst <= 1e-12 and elapsed < 60.0
    _report(
        "network-oracles",
        ok,
        f"1000 graphs, {mismatches} shell mismatches, "
        f"instrument mean rel err {worst:.1e}, {elapsed:.1f}s",
    )
    assert mismatches == 0
    assert worst <= 1e-12
    assert elapsed < 60.0


# ---------------------------------------------------------------------------
# rotation steady state


def test_rotation_steady_state():
    failures = []
    for num, den in ((1, 2), (1, 3), (1, 4)):
        theta = Fraction(num, den)
        size = 1 + den
        res = simulate_rotation(BfParams(a=1.0, b=2.0, theta=theta), n_components=3, cycles=2)
        if res.component_sizes != [size] * 3:
            failures.append(f"theta={theta}: sizes {res.component_sizes}")
        if res.pair_share != Fraction(1, size) or res.idle_share != Fraction(1, size):
            failures.append(f"theta={theta}: shares {res.pair_share}, {res.idle_share}")
    closed_form = (
        steady_state_size(0.5) == 3.0
        and steady_state_size(0.25) == 5.0
        and steady_state_share(0.25) == 0.2
    )
    if not closed_form:
        failures.append("closed forms off")
    ok = not failures
    _report(
        "rotation-steady-state",
        ok,
        "sizes 3/4/5 and exact pair shares 1/3, 1/4, 1/5" if ok else "; ".join(failures),
    )
    assert not failures


# ---------------------------------------------------------------------------
# per-period measures against straight-from-definition recomputation


def test_measure_oracles():
    rng = np.random.default_rng(20260823)
    worst_rel = 0.0
    worst_margin = 0.0
    count_mismatch = 0

    def rel(got, want):
        if want == 0.0:
            return abs(got)
        return abs(got - want) / abs(want)

    for _ in range(100):
        pids, teams, values = random_fixture(rng)
        graph = CollaborationGraph.from_teams(dict(zip(pids, teams)))
        meas = period_measures(pids, teams, values, graph)
        oracle = brute_force_measures(pids, teams, values)
        for i, inv in enumerate(graph.node_ids):
            want = oracle[inv]
            if meas.n_collab[i] != want["n"]:
                count_mismatch += 1
            worst_rel = max(worst_rel, rel(meas.ybar[i], want["ybar"]))
            if want["n"]:
                worst_rel = max(worst_rel, rel(meas.y[i], want["y"]))
                worst_rel = max(worst_rel, rel(meas.y_count[i], want["y_count"]))
                worst_rel = max(
                    worst_rel, rel(meas.y_quality[i], want["y"] / want["y_count"])
                )
                worst_rel = max(worst_rel, rel(meas.kd[i], want["kd"]))
        ok_rows = meas.n_collab > 0
        gap = np.abs(
            np.log(meas.y[ok_rows])
            - (np.log(meas.y_count[ok_rows]) + np.log(meas.y_quality[ok_rows]))
        )
        worst_margin = max(worst_margin, float(gap.max()))

        subs = [
            f"C{int(rng.integers(6)):02d}A{int(rng.integers(2))}/0{int(rng.integers(3))}"
            for _ in pids
        ]
        vocab = build_vocab(subs)
        scopes = scope_table(pids, teams, subs, vocab, graph.node_ids)
        firm_of = {inv: f"F{int(rng.integers(4))}" for inv in graph.node_ids}
        est_of = {inv: f"E{int(rng.integers(6))}" for inv in graph.node_ids}
        cov = firm_covariates(graph, scopes, firm_of, est_of)
        cats = {inv: set(scopes.categories(inv)) for inv in graph.node_ids}
        for i, inv in enumerate(graph.node_ids):
            collabs = set(graph.neighbors(i).tolist())
            others = sum(
                1
                for j, other in enumerate(graph.node_ids)
                if other != inv and firm_of[other] == firm_of[inv] and j not in collabs
            )
            if cov.firm_others[i] != others:
                count_mismatch += 1
            firm_union = set().union(
                *(cats[o] for o in graph.node_ids if firm_of[o] == firm_of[inv])
            )
            known = cats[inv].union(*(cats[graph.node_ids[j]] for j in collabs))
            if cov.firm_outside_scope[i] != len(firm_union - known):
                count_mismatch += 1

    ok = worst_rel <= 1e-12 and worst_margin <= 1e-12 and count_mismatch == 0
    _report(
        "measure-oracles",
        ok,
        f"100 fixtures, worst rel err {worst_rel:.1e}, margin gap {worst_margin:.1e}, "
        f"{count_mismatch} integer mismatches",
    )
    assert worst_rel <= 1e-12
    assert worst_margin <= 1e-12
    assert count_mismatch == 0


# ---------------------------------------------------------------------------
# novelty ranks against an independent per-subgroup sort


def test_novelty_sort_oracle():
    rng = np.random.default_rng(99)
    rows = []
    for p in range(10000):
        sub = (
            f"G{int(rng.integers(8)):02d}"
            f"{'ABC'[int(rng.integers(3))]}{int(rng.integers(3))}"
            f"/{int(rng.integers(4)):02d}"
        )
        rows.append((f"P{p:05d}", sub, day(int(rng.integers(0, 400)))))
    got = novelty_values(rows)

    by_sub: dict[str, list] = {}
    for pid, sub, date in rows:
        by_sub.setdefault(sub, []).append((date, pid))
    want = {}
    ties = 0
    for entries in by_sub.values():
        dates = sorted(d for d, _ in entries)
        seen = set()
        for date, pid in entries:
            rank = 1 + sum(1 for d in dates if d < date)
            want[pid] = 1.0 / rank
            if date in seen:
                ties += 1
            seen.add(date)

    perm = np.random.default_rng(1).permutation(len(rows))
    shuffled = novelty_values([rows[int(k)] for k in perm])

    ok = got == want and shuffled == got and ties > 100
    _report(
        "novelty-oracle",
        ok,
        f"10000 patents, {ties} same-day ties, exact match, order-invariant",
    )
    assert ties > 100
    assert got == want
    assert shuffled == got


# ---------------------------------------------------------------------------
# overidentification size, effective F collapse, pinned critical value


def _hansen_rep(rng: np.random.Generator) -> float:
    n_clusters, per, beta = 100, 5, 0.5
    g = n_clusters * per
    clusters = np.repeat(np.arange(n_clusters), per)
    z = rng.normal(size=(g, 3))
    a = np.repeat(rng.normal(size=n_clusters), per)
    ex = np.repeat(rng.normal(size=n_clusters), per)
    u = 0.7 * a + rng.normal(size=g)
    x = z @ np.array([1.0, 0.8, 0.6]) + 0.8 * ex + 0.5 * u + rng.normal(size=g)
    y = beta * x + u
    fit = tsls_fit(y, np.ones((g, 1)), x, z, ["const", "x"], ["x"], clusters)
    return fit.hansen_p


def test_diagnostics_calibration():
    seeds = np.random.SeedSequence(20260823).spawn(500)
    pvals = np.array([_hansen_rep(np.random.default_rng(s)) for s in seeds])
    size = float(np.mean(pvals < 0.05))

    rng = np.random.default_rng(7)
    n = 400
    z = rng.normal(size=(n, 1))
    x = 0.9 * z[:, 0] + rng.normal(size=n)
    y = x + rng.normal(size=n)
    exog = np.ones((n, 1))
    fit = tsls_fit(
        y, exog, x, z, ["const", "x"], ["x"], np.arange(n), first_stage_vce="classical"
    )
    r0 = x - exog @ np.linalg.lstsq(exog, x, rcond=None)[0]
    full = np.column_stack([exog, z])
    r1 = x - full @ np.linalg.lstsq(full, x, rcond=None)[0]
    classical_f = (r0 @ r0 - r1 @ r1) / (r1 @ r1 / (n - full.shape[1]))
    f_gap = abs(fit.first_stages[0].effective_f - classical_f)

    cv = round(mop_critical_value(1), 2)

    ok = 0.03 <= size <= 0.07 and f_gap <= 1e-8 and cv == 23.11
    _report(
        "diagnostics-calibration",
        ok,
        f"Hansen J size {size:.3f} over 500 reps, effective F vs classical gap "
        f"{f_gap:.1e}, single-instrument critical value {cv}",
    )
    assert 0.03 <= size <= 0.07
    assert f_gap <= 1e-8
    assert cv == 23.11


# ---------------------------------------------------------------------------
# rewiring separates firm-level from partner-level output channels


CF_COMMON = dict(n_inventors=500, n_firms=25, n_uas=8, export_geo=False, seed=11)
CF_FIRM = dict(
    true_beta=0.0,
    firm_output_loading=1.0,
    sigma_area_period=0.7,
    sigma_firm_period=0.4,
    sigma_shock=0.25,
    sigma_noise=0.15,
    shock_correlation=0.0,
)
CF_EXCHANGE = dict(
    true_beta=0.5,
    firm_output_loading=0.0,
    sigma_area_period=0.1,
    sigma_firm_period=0.05,
    sigma_shock=0.6,
    shock_correlation=0.0,
)


def _cf_scenario(overrides):
    economy = generate(SimConfig(**CF_COMMON, **overrides))
    panel, data = build_panel(economy.corpus, PipelineConfig(**PIPE))
    dy = panel.ln_y[:, 1] - panel.ln_y[:, 0]
    dx = panel.ln_kd[:, 1] - panel.ln_kd[:, 0]
    baseline = _fd_slope(dy, dx, None)
    graphs, ybar, firm_of = counterfactual_inputs(economy.corpus, panel, data)
    result = run_ensemble(
        graphs,
        ybar,
        firm_of,
        panel.inventors,
        panel.ln_y,
        baseline,
        n_draws=200,
        seed=11,
        redraw_per_period=False,
    )
    return result, graphs, ybar, firm_of, panel


def test_counterfactual_discrimination():
    firm_res, graphs, ybar, firm_of, panel = _cf_scenario(CF_FIRM)
    exch_res, *_ = _cf_scenario(CF_EXCHANGE)

    # replay the ensemble's own draw stream and audit every draw
    t0 = min(graphs)
    constraints = build_constraints(graphs[t0], firm_of[t0], panel.inventors)
    pools = _firm_pools(firm_of[t0], ybar[t0])
    exclusions = {inv: _exclusion_set(graphs[t0], inv, 2) for inv in panel.inventors}
    audited = violations = 0
    for child in np.random.SeedSequence(11).spawn(200):
        rng = np.random.default_rng(child)
        for k, inv in enumerate(panel.inventors):
            drawn = draw_replacements(rng, constraints[k], pools, exclusions[inv])
            if drawn is None:
                continue
            audited += 1
            per_firm: dict[str, int] = {}
            for m in drawn:
                per_firm[firm_of[t0][m]] = per_firm.get(firm_of[t0][m], 0) + 1
            if per_firm != dict(constraints[k].firm_counts):
                violations += 1
            elif len(set(drawn)) != len(drawn) or set(drawn) & exclusions[inv]:
                violations += 1

    ok = firm_res.ratio > 0.8 and exch_res.ratio < 0.2 and violations == 0
    _report(
        "counterfactual-discrimination",
        ok,
        f"firm-channel ratio {firm_res.ratio:.3f} (> 0.8), exchange-channel ratio "
        f"{exch_res.ratio:.3f} (< 0.2), {violations} count violations in "
        f"{audited} audited draws",
    )
    assert firm_res.ratio > 0.8
    assert exch_res.ratio < 0.2
    assert audited > 0
    assert violations == 0


# ---------------------------------------------------------------------------
# specialization overlap decays with collaboration distance


def test_specialization_overlap_decay():
    t0 = time.perf_counter()
    monotone = 0
    for seed in range(100):
        cfg = SimConfig(
            n_inventors=300, n_firms=30, n_uas=10, export_geo=False, seed=7000 + seed
        )
        pcfg = PipelineConfig(**PIPE, profile_max_order=5)
        panel, data = build_panel(generate(cfg).corpus, pcfg)
        rows = overlap_profile_table(panel, data, pcfg)
        first = panel.periods[0]
        profile = np.array([jm for t, _, jm, _, _ in rows if t == first])
        profile = profile[np.isfinite(profile)]
        if np.all(np.diff(profile) <= 0):
            monotone += 1
    elapsed = time.perf_counter() - t0
    ok = monotone >= 95
    _report(
        "overlap-decay",
        ok,
        f"mean Jaccard non-increasing over orders 0..5 in {monotone}/100 economies, "
        f"{elapsed:.0f}s",
    )
    assert monotone >= 95


# ---------------------------------------------------------------------------
# byte-identical reruns


def test_pipeline_determinism(tmp_path):
    src = tmp_path / "economy"
    export_economy(generate(SimConfig(n_inventors=300, n_firms=30, n_uas=8, seed=99)), src)
    settings = dict(
        patents=str(src / "patents.tsv"),
        inventors=str(src / "inventors.tsv"),
        citations=str(src / "citations.tsv"),
        cells=str(src / "cells.tsv"),
        establishments=str(src / "establishments.tsv"),
        rnd=str(src / "rnd.tsv"),
        out_dir=str(tmp_path / "run"),
        cluster_level="ua",
        geo_covariates=True,
        counterfactual=True,
        counterfactual_draws=5,
        counterfactual_seed=3,
        seed=17,
    )
    run_pipeline(PipelineConfig(**settings))
    first = (tmp_path / "run" / "manifest.txt").read_bytes()
    run_pipeline(PipelineConfig(**settings))
    second = (tmp_path / "run" / "manifest.txt").read_bytes()
    ok = first == second and len(first) > 0
    _report(
        "pipeline-determinism",
        ok,
        f"manifest identical across reruns ({len(first)} bytes)",
    )
    assert first == second
    assert len(first) > 0


# ---------------------------------------------------------------------------
# Monte Carlo recovery of the structural elasticity and its margin split


MC_BETAS = (0.3, 0.5)
MC_REPS = 100
MC_SEED_BASE = {0.3: 31000, 0.5: 51000}


@pytest.fixture(scope="module")
def monte_carlo():
    t0 = time.perf_counter()
    runs = []
    pcfg = PipelineConfig(**PIPE)
    for true_beta in MC_BETAS:
        for rep in range(MC_REPS):
            cfg = SimConfig(
                n_inventors=5000,
                staff_ratio=2.0,
                n_firms=250,
                n_uas=75,
                mean_solo=8.0,
                mean_collaborators=3.0,
                true_beta=true_beta,
                export_geo=False,
                seed=MC_SEED_BASE[true_beta] + rep,
            )
            panel, _ = build_panel(generate(cfg).corpus, pcfg)
            est = estimate_panel(panel, pcfg)
            fit = est.fits["iv_345"]
            idx = fit.names.index("d_ln_kd")
            lo, hi = fit.conf_int()[idx]
            d = est.decomposition
            runs.append(
                {
                    "true_beta": true_beta,
                    "covered": bool(lo <= true_beta <= hi),
                    "ols": est.fits["ols"]["d_ln_kd"],
                    "gap": abs(d.beta - (d.beta_count + d.beta_quality)),
                    "ratio_covered": bool(d.ratio_ci[0] <= 0.5 <= d.ratio_ci[1]),
                }
            )
    return {"runs": runs, "elapsed": time.perf_counter() - t0}


def test_estimator_recovery(monte_carlo):
    runs = monte_carlo["runs"]
    elapsed = monte_carlo["elapsed"]
    coverage = float(np.mean([r["covered"] for r in runs]))
    bias_ses = {}
    for tb in MC_BETAS:
        ols = np.array([r["ols"] for r in runs if r["true_beta"] == tb])
        mc_se = float(ols.std(ddof=1) / np.sqrt(len(ols)))
        bias_ses[tb] = abs(float(ols.mean()) - tb) / mc_se
    ok = (
        0.90 <= coverage <= 0.99
        and all(v > 3.0 for v in bias_ses.values())
        and elapsed < 600.0
    )
    _report(
        "estimator-recovery",
        ok,
        f"IV coverage {coverage:.3f} over {len(runs)} reps, OLS bias "
        + ", ".join(f"{v:.0f} MC SEs at beta {tb}" for tb, v in bias_ses.items())
        + f", {elapsed:.0f}s",
    )
    assert 0.90 <= coverage <= 0.99
    for tb in MC_BETAS:
        assert bias_ses[tb] > 3.0, f"OLS not detectably biased at beta {tb}"
    assert elapsed < 600.0


def test_margin_decomposition(monte_carlo):
    runs = monte_carlo["runs"]
    worst_gap = max(r["gap"] for r in runs)
    ratio_coverage = float(np.mean([r["ratio_covered"] for r in runs]))
    ok = worst_gap <= 1e-10 and ratio_coverage >= 0.90
    _report(
        "margin-decomposition",
        ok,
        f"worst additivity gap {worst_gap:.1e}, ratio CI coverage of 0.5 at "
        f"{ratio_coverage:.3f} over {len(runs)} reps",
    )
    assert worst_gap <= 1e-10
    assert ratio_coverage >= 0.90
