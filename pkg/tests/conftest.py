import datetime as dt

import numpy as np
import pytest

from knowex.graph import CollaborationGraph


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


def random_graph(rng, n_nodes: int, edge_prob: float) -> CollaborationGraph:
    """Erdos-Renyi graph over string node ids N000, N001, ..."""
    ids = [f"N{k:03d}" for k in range(n_nodes)]
    edges = set()
    for a in range(n_nodes):
        for b in range(a + 1, n_nodes):
            if rng.random() < edge_prob:
                edges.add((ids[a], ids[b]))
    return CollaborationGraph.from_edges(ids, edges)


def adjacency_matrix(graph: CollaborationGraph) -> np.ndarray:
    n = graph.n_nodes
    a = np.zeros((n, n), dtype=bool)
    for i in range(n):
        a[i, graph.neighbors(i)] = True
    return a


def shells_by_matrix_power(adj: np.ndarray, source: int, max_order: int) -> list[set[int]]:
    """Distance classes via boolean matrix powers, regrouped into shells.

    reach[d] holds the nodes at graph distance exactly d; shell 0 is
    distance <= 1 (the closed neighborhood), shell l >= 1 is distance
    l + 1.
    """
    n = adj.shape[0]
    reached = np.zeros(n, dtype=bool)
    reached[source] = True
    frontier = reached.copy()
    exact: list[set[int]] = [{source}]
    for _ in range(max_order + 1):
        frontier = (adj.T @ frontier) & ~reached
        exact.append(set(np.flatnonzero(frontier).tolist()))
        reached |= frontier
    shells = [exact[0] | exact[1]]
    for d in range(2, max_order + 2):
        shells.append(exact[d])
    return shells


def day(offset: int) -> dt.date:
    return dt.date(2000, 1, 1) + dt.timedelta(days=offset)
