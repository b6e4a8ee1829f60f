"""Inventor-period production measures built from patent microdata.

Patent values feed everything: a patent's value divided by its team
size is credited to each member, an inventor's output is the sum of
those credits over their patents, and productivity divides by the
number of distinct collaborators.  The differential-knowledge measure
averages, over an inventor's collaborators, the credited value of the
collaborator's patents that the focal inventor did not take part in.
Two value metrics are computed here (novelty from within-subgroup
filing order, quality from screened forward citations); externally
supplied values are accepted wherever a value map is an argument.
"""

from __future__ import annotations

import datetime as dt
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .graph import CollaborationGraph

DAYS_PER_YEAR = 365.25


def novelty_values(rows: list[tuple[str, str, dt.date]]) -> dict[str, float]:
    """Novelty value 1/r from filing order within each subgroup.

    ``rows`` holds (patent id, technological subgroup, application
    date).  Within a subgroup, rank r is one plus the number of patents
    filed strictly earlier, so same-day filings share a rank and the
    next distinct date resumes at the competition rank.  Values are
    1/r; the corpus-wide earliest patents of each subgroup get 1.
    """
    by_group: dict[str, list[tuple[dt.date, str]]] = defaultdict(list)
    for pid, subgroup, date in rows:
        by_group[subgroup].append((date, pid))
    out: dict[str, float] = {}
    for entries in by_group.values():
        entries.sort()
        rank = 0
        prev: dt.date | None = None
        for pos, (date, pid) in enumerate(entries):
            if date != prev:
                rank = pos + 1
                prev = date
            if pid in out:
                raise DataError(f"duplicate patent id {pid!r} in novelty input")
            out[pid] = 1.0 / rank
    return out


@dataclass
class QualityStats:
    """Bookkeeping from citation screening."""

    counted: int = 0
    outside_window: int = 0
    same_firm: int = 0
    external_citing: int = 0
    unknown_cited: int = 0


def quality_values(
    rows: list[tuple[str, tuple[str, ...], dt.date]],
    citations: list[tuple[str, str]],
    inventor_firms: dict[str, set[str]],
    window_years: float = 5.0,
) -> tuple[dict[str, float], QualityStats]:
    """Quality value: screened forward-citation count in a fixed window.

    ``rows`` holds (patent id, inventor team, application date) for the
    whole corpus; ``citations`` holds (citing id, cited id) pairs.  A
    citation counts toward the cited patent when the citing patent is
    in the corpus, applied within ``window_years`` (measured in days,
    365.25 per year) on or after the cited patent's application date,
    and no citing inventor belongs to any firm that any cited-patent
    inventor was ever affiliated with (any period).  Citing patents not
    in the corpus cannot be screened and are logged, not counted.

    ``inventor_firms`` maps inventor id to all firm ids across periods.
    """
    info: dict[str, tuple[tuple[str, ...], dt.date]] = {}
    for pid, team, date in rows:
        if pid in info:
            raise DataError(f"duplicate patent id {pid!r} in quality input")
        info[pid] = (team, date)

    window_days = round(window_years * DAYS_PER_YEAR)
    counts: dict[str, int] = {pid: 0 for pid in info}
    stats = QualityStats()
    firm_block: dict[str, set[str]] = {}

    for citing_id, cited_id in citations:
        if cited_id not in info:
            stats.unknown_cited += 1
            continue
        if citing_id not in info:
            stats.external_citing += 1
            continue
        citing_team, citing_date = info[citing_id]
        cited_team, cited_date = info[cited_id]
        lag = (citing_date - cited_date).days
        if lag < 0 or lag >= window_days:
            stats.outside_window += 1
            continue
        if cited_id not in firm_block:
            blocked: set[str] = set()
            for inv in cited_team:
                blocked |= inventor_firms.get(inv, set())
            firm_block[cited_id] = blocked
        blocked = firm_block[cited_id]
        if any(inventor_firms.get(inv, set()) & blocked for inv in citing_team):
            stats.same_firm += 1
            continue
        counts[cited_id] += 1
        stats.counted += 1

    return {pid: float(c) for pid, c in counts.items()}, stats


@dataclass
class MeasureTable:
    """Per-inventor measures for one period, aligned with graph nodes.

    Undefined entries (inventors without collaborators) are NaN; the
    sample-selection stage decides what to do with them.
    """

    period: int
    node_ids: tuple[str, ...]
    n_collab: np.ndarray
    ybar: np.ndarray
    ybar_count: np.ndarray
    y: np.ndarray
    y_count: np.ndarray
    y_quality: np.ndarray
    kd: np.ndarray

    def row(self, inventor_id: str) -> dict[str, float]:
        i = self.node_ids.index(inventor_id)
        return {
            "n": float(self.n_collab[i]),
            "ybar": float(self.ybar[i]),
            "y": float(self.y[i]),
            "y_count": float(self.y_count[i]),
            "y_quality": float(self.y_quality[i]),
            "kd": float(self.kd[i]),
        }


def period_measures(
    patent_ids: list[str],
    teams: list[tuple[str, ...]],
    values: dict[str, float],
    graph: CollaborationGraph,
    period: int = 0,
) -> MeasureTable:
    """Compute output, productivity, margins, and differential knowledge.

    ``graph`` must be the collaboration graph built from the same
    ``teams``.  For inventor i with collaborators N_i: ybar sums value
    credits g/|team| over i's patents; y = ybar / |N_i|; the count
    margin replaces g by 1; the quality margin is their ratio; and kd
    averages over j in N_i the credited value of j's patents that i is
    not on.  Identity ``y = y_count * y_quality`` holds exactly.
    """
    n = graph.n_nodes
    ybar = np.zeros(n)
    ybar_cnt = np.zeros(n)
    deg = graph.degrees().astype(np.float64)

    # solo and pair teams take a flat path; larger teams loop generally
    lookup = graph._index
    member_rows: list[int] = []
    credit_rows: list[float] = []
    count_rows: list[float] = []
    pair_i: list[int] = []
    pair_j: list[int] = []
    pair_credit: list[float] = []
    for pid, team in zip(patent_ids, teams, strict=True):
        try:
            g = values[pid]
        except KeyError:
            raise DataError(f"no value for patent {pid!r}") from None
        if not np.isfinite(g) or g < 0:
            raise DataError(f"patent {pid!r} has invalid value {g!r}")
        if len(team) == 1:
            try:
                member_rows.append(lookup[team[0]])
            except KeyError:
                raise DataError(f"inventor {team[0]!r} is not in the graph") from None
            credit_rows.append(g)
            count_rows.append(1.0)
            continue
        if len(team) == 2 and team[0] != team[1]:
            try:
                a = lookup[team[0]]
                b = lookup[team[1]]
            except KeyError as exc:
                raise DataError(f"inventor {exc.args[0]!r} is not in the graph") from None
            credit = g / 2.0
            member_rows.append(a)
            member_rows.append(b)
            credit_rows.append(credit)
            credit_rows.append(credit)
            count_rows.append(0.5)
            count_rows.append(0.5)
            pair_i.append(a)
            pair_i.append(b)
            pair_j.append(b)
            pair_j.append(a)
            pair_credit.append(credit)
            pair_credit.append(credit)
            continue
        members = sorted(set(team))
        if not members:
            raise DataError(f"patent {pid!r} has an empty inventor set")
        size = len(members)
        credit = g / size
        try:
            idx = [lookup[m] for m in members]
        except KeyError as exc:
            raise DataError(f"inventor {exc.args[0]!r} is not in the graph") from None
        for ii in idx:
            member_rows.append(ii)
            credit_rows.append(credit)
            count_rows.append(1.0 / size)
        for a in idx:
            for b in idx:
                if a != b:
                    pair_i.append(a)
                    pair_j.append(b)
                    pair_credit.append(credit)

    mi = np.asarray(member_rows, dtype=np.int64)
    np.add.at(ybar, mi, np.asarray(credit_rows))
    np.add.at(ybar_cnt, mi, np.asarray(count_rows))

    # shared credit on each directed edge: patents containing both i and j
    shared = np.zeros(graph.indices.shape[0])
    row_of = np.repeat(np.arange(n, dtype=np.int64), np.diff(graph.indptr))
    if pair_i:
        ii = np.asarray(pair_i, dtype=np.int64)
        jj = np.asarray(pair_j, dtype=np.int64)
        global_keys = row_of * n + graph.indices
        pos = np.searchsorted(global_keys, ii * n + jj)
        if not np.array_equal(global_keys[pos], ii * n + jj):
            raise DataError("co-invention pair missing from the collaboration graph")
        np.add.at(shared, pos, np.asarray(pair_credit))

    sums = np.zeros(n)
    np.add.at(sums, row_of, ybar[graph.indices] - shared)

    with np.errstate(invalid="ignore", divide="ignore"):
        kd = np.where(deg > 0, sums / deg, np.nan)
        y = np.where(deg > 0, ybar / deg, np.nan)
        y_count = np.where(deg > 0, ybar_cnt / deg, np.nan)
        y_quality = np.where(ybar_cnt > 0, y / y_count, np.nan)

    return MeasureTable(
        period=period,
        node_ids=graph.node_ids,
        n_collab=deg.astype(np.int64),
        ybar=ybar,
        ybar_count=ybar_cnt,
        y=y,
        y_count=y_count,
        y_quality=y_quality,
        kd=kd,
    )


# ---------------------------------------------------------------------------
# research scope and its cumulative breadth


def category_at_level(subgroup: str, level: str) -> str:
    """Slice a hierarchical code like ``G06F17/30`` to a coarser level."""
    if level == "subgroup":
        return subgroup
    if level == "group":
        return subgroup.split("/", 1)[0]
    if level == "subclass":
        return subgroup[:4]
    if level == "class":
        return subgroup[:3]
    if level == "section":
        return subgroup[:1]
    raise DataError(f"unknown category level {level!r}")


@dataclass
class ScopeTable:
    """Per-inventor category bitsets for one period over a fixed vocabulary."""

    period: int
    inventor_ids: tuple[str, ...]
    vocab: dict[str, int]
    words: np.ndarray
    _index: dict[str, int] = field(repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        if not self._index:
            self._index = {v: k for k, v in enumerate(self.inventor_ids)}

    def categories(self, inventor_id: str) -> set[str]:
        i = self._index[inventor_id]
        names = sorted(self.vocab, key=self.vocab.get)
        out = set()
        for c, name in enumerate(names):
            if self.words[i, c >> 6] >> np.uint64(c & 63) & np.uint64(1):
                out.add(name)
        return out

    def sizes(self) -> np.ndarray:
        return np.bitwise_count(self.words).sum(axis=1).astype(np.int64)


def build_vocab(subgroups: list[str], level: str = "subgroup") -> dict[str, int]:
    cats = sorted({category_at_level(s, level) for s in subgroups})
    return {c: i for i, c in enumerate(cats)}


def scope_table(
    patent_ids: list[str],
    teams: list[tuple[str, ...]],
    subgroups: list[str],
    vocab: dict[str, int],
    inventor_ids: tuple[str, ...],
    level: str = "subgroup",
    period: int = 0,
) -> ScopeTable:
    """Union of patent categories per inventor for one period."""
    index = {v: k for k, v in enumerate(inventor_ids)}
    n_words = max(1, (len(vocab) + 63) // 64)
    words = np.zeros((len(inventor_ids), n_words), dtype=np.uint64)
    rows: list[int] = []
    cols: list[int] = []
    bits: list[int] = []
    for pid, team, sub in zip(patent_ids, teams, subgroups, strict=True):
        cat = category_at_level(sub, level)
        try:
            c = vocab[cat]
        except KeyError:
            raise DataError(f"category {cat!r} of patent {pid!r} missing from vocabulary") from None
        col = c >> 6
        bit = 1 << (c & 63)
        for m in set(team):
            try:
                rows.append(index[m])
            except KeyError:
                raise DataError(f"inventor {m!r} of patent {pid!r} not in scope universe") from None
            cols.append(col)
            bits.append(bit)
    if rows:
        np.bitwise_or.at(
            words,
            (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64)),
            np.asarray(bits, dtype=np.uint64),
        )
    return ScopeTable(period=period, inventor_ids=inventor_ids, vocab=vocab, words=words)


def cumulative_breadth(tables: list[ScopeTable], inventor_ids: tuple[str, ...]) -> dict[int, np.ndarray]:
    """Knowledge breadth: distinct categories accumulated before each period.

    ``tables`` must cover consecutive periods in order, starting with
    the pre-sample period; the breadth reported for period t counts the
    union of scopes over all strictly earlier tables.  Breadth for the
    first table's period is therefore all zeros.
    """
    n_words = tables[0].words.shape[1]
    acc = np.zeros((len(inventor_ids), n_words), dtype=np.uint64)
    index = {v: k for k, v in enumerate(inventor_ids)}
    out: dict[int, np.ndarray] = {}
    for table in tables:
        out[table.period] = np.bitwise_count(acc).sum(axis=1).astype(np.int64)
        rows = np.array([index[i] for i in table.inventor_ids], dtype=np.int64)
        if rows.size:
            acc[rows] |= table.words
    return out


# ---------------------------------------------------------------------------
# same-firm and same-establishment covariates


@dataclass
class FirmCovariates:
    inventor_ids: tuple[str, ...]
    firm_others: np.ndarray
    firm_outside_scope: np.ndarray
    est_others: np.ndarray
    est_outside_scope: np.ndarray


def firm_covariates(
    graph: CollaborationGraph,
    scopes: ScopeTable,
    firm_of: dict[str, str],
    establishment_of: dict[str, str],
) -> FirmCovariates:
    """Counts of non-collaborating colleagues and their outside knowledge.

    For inventor i: colleagues are same-firm (same-establishment)
    inventors other than i and i's collaborators; outside knowledge is
    the number of categories covered by the whole firm (establishment)
    that neither i nor any collaborator of i covers this period.
    """
    ids = scopes.inventor_ids
    if ids != graph.node_ids:
        raise DataError("scope table and graph are not aligned")
    n = len(ids)
    n_words = scopes.words.shape[1]

    def group_stats(group_of: dict[str, str]) -> tuple[np.ndarray, np.ndarray]:
        members: dict[str, list[int]] = defaultdict(list)
        for i, inv in enumerate(ids):
            try:
                members[group_of[inv]].append(i)
            except KeyError:
                raise DataError(f"inventor {inv!r} has no group label") from None
        union = {g: np.bitwise_or.reduce(scopes.words[rows], axis=0) for g, rows in members.items()}
        others = np.zeros(n, dtype=np.int64)
        outside = np.zeros(n, dtype=np.int64)
        for i, inv in enumerate(ids):
            g = group_of[inv]
            neigh = graph.neighbors(i)
            excl = set(neigh.tolist())
            excl.add(i)
            others[i] = sum(1 for r in members[g] if r not in excl)
            mine = scopes.words[i].copy()
            for j in neigh:
                mine |= scopes.words[int(j)]
            outside[i] = int(np.bitwise_count(union[g] & ~mine).sum())
        return others, outside

    f_o, f_s = group_stats(firm_of)
    e_o, e_s = group_stats(establishment_of)
    return FirmCovariates(
        inventor_ids=ids,
        firm_others=f_o,
        firm_outside_scope=f_s,
        est_others=e_o,
        est_outside_scope=e_s,
    )
