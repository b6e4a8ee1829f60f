"""Collaboration graphs, indirect-collaborator shells, and shell averages.

A period's co-invention network is an undirected simple graph: nodes are
inventors with at least one patent in the period, and an edge joins two
inventors who appear together on at least one patent.  The ``order-l``
indirect collaborators of inventor i are the l-th shell of that graph:
order 0 is i plus the direct collaborators, and shell l (l >= 1) holds
the nodes first reached by expanding the neighborhood l more steps, so
shell l sits at graph distance l + 1 from i.  Averaging a node statistic
(in particular the differential-knowledge measure) over a far shell is
what turns the network into an instrument; averaging scope overlap over
shells traces how research similarity decays with network distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DataError


@dataclass
class CollaborationGraph:
    """Undirected simple graph in CSR form with stable external node ids.

    Nodes are ordered by id; adjacency lists are sorted.  Construction
    is set-based, so duplicate joint patents or duplicate edge rows
    collapse to a single edge and rebuilding a graph from its own edge
    dump reproduces it exactly.
    """

    node_ids: tuple[str, ...]
    indptr: np.ndarray
    indices: np.ndarray
    _index: dict[str, int] = field(repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        if not self._index:
            self._index = {v: k for k, v in enumerate(self.node_ids)}

    @classmethod
    def from_teams(cls, teams: dict[str, tuple[str, ...]]) -> "CollaborationGraph":
        """Build from patent teams: mapping patent id -> inventor ids."""
        nodes: set[str] = set()
        edges: set[tuple[str, str]] = set()
        for pid, team in teams.items():
            if not team:
                raise DataError(f"patent {pid!r} has an empty inventor set")
            nodes.update(team)
            # solo and pair teams dominate real corpora; adjacency below
            # is orientation-insensitive, so pairs need no sorting
            if len(team) == 2:
                if team[0] != team[1]:
                    edges.add((team[0], team[1]))
            elif len(team) > 2:
                members = sorted(set(team))
                for a in range(len(members)):
                    for b in range(a + 1, len(members)):
                        edges.add((members[a], members[b]))
        return cls.from_edges(sorted(nodes), edges)

    @classmethod
    def from_edges(
        cls, node_ids: list[str] | tuple[str, ...], edges: set[tuple[str, str]]
    ) -> "CollaborationGraph":
        ids = tuple(sorted(set(node_ids)))
        index = {v: k for k, v in enumerate(ids)}
        n = len(ids)
        adj: list[set[int]] = [set() for _ in range(n)]
        for a, b in edges:
            try:
                ia, ib = index[a], index[b]
            except KeyError as exc:
                raise DataError(f"edge endpoint {exc.args[0]!r} is not a listed node") from None
            if ia == ib:
                raise DataError(f"self-collaboration edge on node {a!r}")
            adj[ia].add(ib)
            adj[ib].add(ia)
        indptr = np.zeros(n + 1, dtype=np.int64)
        for i, s in enumerate(adj):
            indptr[i + 1] = indptr[i] + len(s)
        indices = np.empty(int(indptr[-1]), dtype=np.int64)
        for i, s in enumerate(adj):
            indices[indptr[i] : indptr[i + 1]] = sorted(s)
        return cls(node_ids=ids, indptr=indptr, indices=indices, _index=index)

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    def index_of(self, node_id: str) -> int:
        try:
            return self._index[node_id]
        except KeyError:
            raise DataError(f"unknown inventor id {node_id!r}") from None

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def edge_dump(self) -> list[tuple[str, str]]:
        """All edges as id pairs, each once, in lexicographic order."""
        rows = []
        for i in range(self.n_nodes):
            for j in self.neighbors(i):
                if i < j:
                    pair = (self.node_ids[i], self.node_ids[int(j)])
                    rows.append((min(pair), max(pair)))
        return sorted(rows)


def hop_frontiers(graph: CollaborationGraph, source: int, max_order: int) -> list[np.ndarray]:
    """Materialize the indirect-collaborator shells of one node.

    Returns ``max_order + 1`` sorted index arrays: position 0 is the
    closed neighborhood (source plus direct collaborators), position l
    the exact-order-l shell.  Shells are pairwise disjoint and their
    union is everything within graph distance ``max_order + 1``.
    """
    if max_order < 0:
        raise DataError("shell order cannot be negative")
    seen = {source}
    frontier = [source]
    out: list[np.ndarray] = []
    for depth in range(max_order + 1):
        nxt: set[int] = set()
        for u in frontier:
            nxt.update(int(v) for v in graph.neighbors(u))
        nxt -= seen
        if depth == 0:
            closed = sorted(seen | nxt)
            out.append(np.array(closed, dtype=np.int64))
        else:
            out.append(np.array(sorted(nxt), dtype=np.int64))
        seen |= nxt
        frontier = sorted(nxt)
    return out


def hop_table_rows(
    graph: CollaborationGraph, sources: list[int], max_order: int
) -> list[tuple[str, int, str]]:
    """Shell membership dump: (inventor, order, member) in stable order."""
    rows = []
    for s in sources:
        shells = hop_frontiers(graph, s, max_order)
        sid = graph.node_ids[s]
        for order, members in enumerate(shells):
            for m in members:
                rows.append((sid, order, graph.node_ids[int(m)]))
    rows.sort()
    return rows


def shell_value_means(
    graph: CollaborationGraph,
    sources: np.ndarray,
    values: np.ndarray,
    orders: list[int],
) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Average a node value over each requested indirect shell.

    ``values`` is aligned with graph node order; non-finite entries are
    skipped.  For each order l >= 1 the function returns per-source
    means over the exact shell (distance l + 1) together with the count
    of contributing nodes.  Empty shells yield NaN with count 0; the
    caller decides whether that drops the inventor.  By construction the
    average reads only shell members, never anything closer.
    """
    if not orders or min(orders) < 1:
        raise DataError("instrument shell orders must be >= 1")
    if values.shape[0] != graph.n_nodes:
        raise DataError("value vector is not aligned with the graph nodes")
    max_depth = max(orders) + 1
    sums, counts = _kernels.hop_value_stats(
        graph.indptr, graph.indices, np.asarray(sources, dtype=np.int64), values, max_depth
    )
    out: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    with np.errstate(invalid="ignore"):
        for order in orders:
            c = counts[:, order]
            means = np.where(c > 0, sums[:, order] / np.maximum(c, 1), np.nan)
            out[order] = (means, c)
    return out


def scope_bitsets(
    scope_sets: list[set[int]] | dict[int, set[int]], n_nodes: int, n_categories: int
) -> np.ndarray:
    """Pack per-node category sets into a uint64 bitset matrix."""
    n_words = max(1, (n_categories + 63) // 64)
    words = np.zeros((n_nodes, n_words), dtype=np.uint64)
    items = scope_sets.items() if isinstance(scope_sets, dict) else enumerate(scope_sets)
    for node, cats in items:
        for c in cats:
            if not 0 <= c < n_categories:
                raise DataError(f"category index {c} out of range")
            words[node, c >> 6] |= np.uint64(1) << np.uint64(c & 63)
    return words


def shell_overlap_profile(
    graph: CollaborationGraph,
    sources: np.ndarray,
    scopes: np.ndarray,
    max_order: int,
    include_focal: bool = False,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean scope Jaccard similarity and common-category count by order.

    Order 0 compares the source with its direct collaborators (the
    closed neighborhood without the source itself); order l >= 1 with
    the exact order-l shell.  ``include_focal`` adds the source's own
    perfect self-overlap into the order-0 average, for sensitivity
    checks only.  Pairs whose two scopes are both empty are skipped.

    Returns ``(jaccard, common, counts)`` arrays of shape
    ``(len(sources), max_order + 1)``; empty cells are NaN.
    """
    if max_order < 0:
        raise DataError("shell order cannot be negative")
    sources = np.asarray(sources, dtype=np.int64)
    jsum, csum, counts = _kernels.hop_jaccard_stats(
        graph.indptr, graph.indices, sources, scopes, max_order + 1
    )
    jsum = jsum.copy()
    csum = csum.copy()
    counts = counts.copy()
    if include_focal:
        own = np.bitwise_count(scopes[sources]).sum(axis=1)
        nonempty = own > 0
        jsum[nonempty, 0] += 1.0
        csum[nonempty, 0] += own[nonempty]
        counts[nonempty, 0] += 1
    with np.errstate(invalid="ignore"):
        denom = np.maximum(counts, 1)
        jacc = np.where(counts > 0, jsum / denom, np.nan)
        common = np.where(counts > 0, csum / denom, np.nan)
    return jacc, common, counts
