import datetime as dt

import numpy as np
import pytest

from knowex.errors import DataError
from knowex.graph import CollaborationGraph
from knowex.measures import (
    ScopeTable,
    build_vocab,
    category_at_level,
    cumulative_breadth,
    firm_covariates,
    novelty_values,
    period_measures,
    quality_values,
    scope_table,
)

from conftest import day


def random_fixture(rng, n_inventors=20, n_patents=60):
    """Random patent table plus values, returned in column form."""
    ids = [f"I{k:02d}" for k in range(n_inventors)]
    pids, teams = [], []
    for p in range(n_patents):
        size = int(rng.integers(1, 5))
        team = tuple(rng.choice(ids, size=size, replace=False))
        pids.append(f"P{p:03d}")
        teams.append(team)
    values = {pid: float(rng.uniform(0.1, 5.0)) for pid in pids}
    return pids, teams, values


def brute_force_measures(pids, teams, values):
    """Straight-from-definition recomputation with python sets."""
    inventors = sorted({m for t in teams for m in t})
    collab = {i: set() for i in inventors}
    patents_of = {i: [] for i in inventors}
    for pid, team in zip(pids, teams):
        distinct = set(team)
        for m in distinct:
            patents_of[m].append(pid)
            collab[m] |= distinct - {m}
    out = {}
    for i in inventors:
        ybar = sum(values[p] / len(set(dict(zip(pids, teams))[p])) for p in patents_of[i])
        ybar_cnt = sum(1.0 / len(set(dict(zip(pids, teams))[p])) for p in patents_of[i])
        n = len(collab[i])
        kd = float("nan")
        if n:
            team_of = dict(zip(pids, teams))
            total = 0.0
            for j in collab[i]:
                for p in patents_of[j]:
                    members = set(team_of[p])
                    if i not in members:
                        total += values[p] / len(members)
            kd = total / n
        out[i] = {
            "n": n,
            "ybar": ybar,
            "y": ybar / n if n else float("nan"),
            "y_count": ybar_cnt / n if n else float("nan"),
            "kd": kd,
        }
    return out


def test_period_measures_match_brute_force(rng):
    for _ in range(20):
        pids, teams, values = random_fixture(rng)
        graph = CollaborationGraph.from_teams(dict(zip(pids, teams)))
        meas = period_measures(pids, teams, values, graph)
        oracle = brute_force_measures(pids, teams, values)
        for i, inv in enumerate(graph.node_ids):
            want = oracle[inv]
            assert meas.n_collab[i] == want["n"]
            assert meas.ybar[i] == pytest.approx(want["ybar"], rel=1e-12)
            if want["n"]:
                assert meas.y[i] == pytest.approx(want["y"], rel=1e-12)
                assert meas.y_count[i] == pytest.approx(want["y_count"], rel=1e-12)
                assert meas.kd[i] == pytest.approx(want["kd"], rel=1e-12, abs=1e-15)
            else:
                assert np.isnan(meas.y[i]) and np.isnan(meas.kd[i])


def test_margin_identity_holds_rowwise(rng):
    pids, teams, values = random_fixture(rng, n_patents=80)
    graph = CollaborationGraph.from_teams(dict(zip(pids, teams)))
    meas = period_measures(pids, teams, values, graph)
    ok = meas.n_collab > 0
    got = np.log(meas.y[ok])
    want = np.log(meas.y_count[ok]) + np.log(meas.y_quality[ok])
    assert np.allclose(got, want, rtol=0, atol=1e-12)


def test_period_measures_missing_value_raises():
    graph = CollaborationGraph.from_teams({"P1": ("A", "B")})
    with pytest.raises(DataError, match="no value"):
        period_measures(["P1"], [("A", "B")], {}, graph)


def test_period_measures_invalid_value_raises():
    graph = CollaborationGraph.from_teams({"P1": ("A", "B")})
    with pytest.raises(DataError, match="invalid value"):
        period_measures(["P1"], [("A", "B")], {"P1": float("inf")}, graph)


def test_period_measures_inventor_not_in_graph_raises():
    graph = CollaborationGraph.from_teams({"P1": ("A", "B")})
    with pytest.raises(DataError, match="not in the graph"):
        period_measures(["P1", "P2"], [("A", "B"), ("C",)], {"P1": 1.0, "P2": 1.0}, graph)


def test_differential_knowledge_excludes_joint_work():
    # A-B collaborate on P1; B solos P2.  A's kd must only see P2.
    pids = ["P1", "P2"]
    teams = [("A", "B"), ("B",)]
    values = {"P1": 100.0, "P2": 3.0}
    graph = CollaborationGraph.from_teams(dict(zip(pids, teams)))
    meas = period_measures(pids, teams, values, graph)
    assert meas.kd[graph.index_of("A")] == pytest.approx(3.0, rel=1e-14)
    # B's kd sees A's credited share of P1 minus... nothing: joint patents are
    # exactly the ones excluded, and A has no other work
    assert meas.kd[graph.index_of("B")] == 0.0


# ---------------------------------------------------------------------------
# novelty


def test_novelty_matches_sort_oracle(rng):
    rows = []
    for p in range(500):
        sub = f"G{int(rng.integers(4)):02d}A{int(rng.integers(3))}/{int(rng.integers(2)):02d}"
        rows.append((f"P{p:04d}", sub, day(int(rng.integers(0, 200)))))
    got = novelty_values(rows)

    by_sub = {}
    for pid, sub, date in rows:
        by_sub.setdefault(sub, []).append((date, pid))
    want = {}
    for entries in by_sub.values():
        dates = sorted(d for d, _ in entries)
        for date, pid in entries:
            rank = 1 + sum(1 for d in dates if d < date)
            want[pid] = 1.0 / rank
    assert got == want


def test_novelty_same_day_share_competition_rank():
    rows = [
        ("A", "G01", day(0)),
        ("B", "G01", day(0)),
        ("C", "G01", day(5)),
    ]
    got = novelty_values(rows)
    assert got["A"] == 1.0 and got["B"] == 1.0
    assert got["C"] == pytest.approx(1.0 / 3.0)


def test_novelty_duplicate_id_raises():
    with pytest.raises(DataError, match="duplicate patent id"):
        novelty_values([("A", "G01", day(0)), ("A", "G01", day(1))])


# ---------------------------------------------------------------------------
# quality (screened citations)


def _quality_rows():
    return [
        ("P1", ("A",), day(0)),
        ("P2", ("B",), day(10)),
        ("P3", ("C",), day(20)),
    ]


def test_quality_counts_clean_citation():
    values, stats = quality_values(
        _quality_rows(), [("P2", "P1")], {"A": {"F1"}, "B": {"F2"}, "C": {"F3"}}
    )
    assert values["P1"] == 1.0
    assert stats.counted == 1


def test_quality_window_boundary_is_half_open():
    window_days = round(5.0 * 365.25)  # 1826
    rows = [
        ("P1", ("A",), day(0)),
        ("Pin", ("B",), day(window_days - 1)),
        ("Pout", ("C",), day(window_days)),
    ]
    values, stats = quality_values(
        rows, [("Pin", "P1"), ("Pout", "P1")], {"A": {"F1"}, "B": {"F2"}, "C": {"F3"}}
    )
    assert values["P1"] == 1.0
    assert stats.outside_window == 1


def test_quality_backdated_citation_excluded():
    values, stats = quality_values(
        _quality_rows(), [("P1", "P2")], {"A": {"F1"}, "B": {"F2"}, "C": {"F3"}}
    )
    assert values["P2"] == 0.0
    assert stats.outside_window == 1


def test_quality_same_firm_any_period_excluded():
    # B shares firm F1 with A through a past affiliation
    values, stats = quality_values(
        _quality_rows(), [("P2", "P1")], {"A": {"F1"}, "B": {"F1", "F9"}, "C": {"F3"}}
    )
    assert values["P1"] == 0.0
    assert stats.same_firm == 1


def test_quality_external_citer_logged_not_counted():
    values, stats = quality_values(
        _quality_rows(), [("PX", "P1")], {"A": {"F1"}, "B": {"F2"}, "C": {"F3"}}
    )
    assert values["P1"] == 0.0
    assert stats.external_citing == 1


def test_quality_unknown_cited_logged():
    values, stats = quality_values(
        _quality_rows(), [("P2", "PZ")], {"A": {"F1"}, "B": {"F2"}, "C": {"F3"}}
    )
    assert stats.unknown_cited == 1


# ---------------------------------------------------------------------------
# scopes and breadth


def test_category_levels():
    assert category_at_level("G06F17/30", "subgroup") == "G06F17/30"
    assert category_at_level("G06F17/30", "group") == "G06F17"
    assert category_at_level("G06F17/30", "subclass") == "G06F"
    assert category_at_level("G06F17/30", "class") == "G06"
    assert category_at_level("G06F17/30", "section") == "G"
    with pytest.raises(DataError, match="unknown category level"):
        category_at_level("G06F17/30", "family")


def test_scope_table_and_sizes():
    vocab = build_vocab(["G01A1/01", "G01A1/02", "H02B2/01"])
    table = scope_table(
        ["P1", "P2"],
        [("A", "B"), ("A",)],
        ["G01A1/01", "H02B2/01"],
        vocab,
        ("A", "B"),
    )
    assert table.categories("A") == {"G01A1/01", "H02B2/01"}
    assert table.categories("B") == {"G01A1/01"}
    assert table.sizes().tolist() == [2, 1]


def test_scope_table_unknown_member_raises():
    vocab = build_vocab(["G01A1/01"])
    with pytest.raises(DataError, match="not in scope universe"):
        scope_table(["P1"], [("Z",)], ["G01A1/01"], vocab, ("A",))


def test_cumulative_breadth_counts_strictly_earlier_periods():
    vocab = build_vocab(["A01B1/01", "A01B1/02", "A01B1/03"])
    universe = ("I1", "I2")
    t0 = scope_table(["P1"], [("I1",)], ["A01B1/01"], vocab, universe, period=0)
    t1 = scope_table(
        ["P2", "P3"], [("I1",), ("I2",)], ["A01B1/02", "A01B1/03"], vocab, universe, period=1
    )
    t2 = scope_table(["P4"], [("I1",)], ["A01B1/01"], vocab, universe, period=2)
    breadth = cumulative_breadth([t0, t1, t2], universe)
    assert breadth[0].tolist() == [0, 0]
    assert breadth[1].tolist() == [1, 0]
    assert breadth[2].tolist() == [2, 1]


# ---------------------------------------------------------------------------
# firm covariates


def test_firm_covariates_brute_force(rng):
    ids = [f"I{k}" for k in range(8)]
    pids = [f"P{k}" for k in range(12)]
    teams = [tuple(rng.choice(ids, size=int(rng.integers(1, 4)), replace=False)) for _ in pids]
    subs = [f"C{int(rng.integers(6)):02d}A1/01" for _ in pids]
    graph = CollaborationGraph.from_teams(dict(zip(pids, teams)))
    vocab = build_vocab(subs)
    scopes = scope_table(pids, teams, subs, vocab, graph.node_ids)
    firm_of = {inv: f"F{k % 3}" for k, inv in enumerate(graph.node_ids)}
    est_of = {inv: f"E{k % 4}" for k, inv in enumerate(graph.node_ids)}
    cov = firm_covariates(graph, scopes, firm_of, est_of)

    cats = {inv: scopes.categories(inv) for inv in graph.node_ids}
    for i, inv in enumerate(graph.node_ids):
        colleagues = [
            j
            for j, other in enumerate(graph.node_ids)
            if other != inv and firm_of[other] == firm_of[inv]
        ]
        collabs = set(graph.neighbors(i).tolist())
        want_others = sum(1 for j in colleagues if j not in collabs)
        assert cov.firm_others[i] == want_others
        firm_union = set().union(
            *(cats[o] for o in graph.node_ids if firm_of[o] == firm_of[inv])
        )
        known = set(cats[inv]).union(*(cats[graph.node_ids[j]] for j in collabs)) if collabs else set(cats[inv])
        assert cov.firm_outside_scope[i] == len(firm_union - known)


def test_firm_covariates_missing_label_raises():
    graph = CollaborationGraph.from_teams({"P1": ("A", "B")})
    vocab = build_vocab(["G01A1/01"])
    scopes = scope_table(["P1"], [("A", "B")], ["G01A1/01"], vocab, graph.node_ids)
    with pytest.raises(DataError, match="no group label"):
        firm_covariates(graph, scopes, {"A": "F1"}, {"A": "E1", "B": "E1"})
