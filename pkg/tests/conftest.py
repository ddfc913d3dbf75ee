import numpy as np
import pytest

from collabpred.graph import AuthorIndex, GraphSnapshot


def graph_from_edges(edges, n=None, weights=None, names=None):
    """Snapshot from a list of (u, v) integer pairs."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if n is None:
        n = int(edges.max()) + 1 if len(edges) else 0
    index = AuthorIndex(names) if names is not None else None
    return GraphSnapshot.from_pairs(n, edges[:, 0], edges[:, 1], weights, index=index)


def random_graph(rng, n, p):
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    return graph_from_edges(np.stack([iu[keep], ju[keep]], 1), n)


def adjacency_sets(g):
    return [set(g.neighbors(u).tolist()) for u in range(g.n)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_cliques():
    """Two 4-cliques {0..3} and {4..7} joined by the edge 3-4."""
    edges = [(a, b) for a in range(4) for b in range(a + 1, 4)]
    edges += [(a + 4, b + 4) for a, b in edges]
    edges.append((3, 4))
    return graph_from_edges(edges, 8)
