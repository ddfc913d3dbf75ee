import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from collabpred.community import (CommunityAssignment, intra_rate, label_pair_community, louvain, modularity,
                                  read_assignment, select_top_community, write_assignment)
from collabpred.graph import AuthorIndex

from conftest import graph_from_edges, random_graph


def _clique(nodes):
    return [(a, b) for a, b in itertools.combinations(nodes, 2)]


def _nx(g):
    G = nx.Graph()
    G.add_nodes_from(g.nodes.tolist())
    u, v, w = g.edges()
    G.add_weighted_edges_from(zip(u.tolist(), v.tolist(), w.tolist()))
    return G


def _partitions(items):
    # all set partitions, as label lists
    if not items:
        yield {}
        return
    first, rest = items[0], items[1:]
    for p in _partitions(rest):
        used = set(p.values())
        for c in used:
            yield {**p, first: c}
        yield {**p, first: len(used)}


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(5, 25), st.floats(0.1, 0.6))
def test_modularity_matches_networkx(seed, n, p):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, p)
    if g.edge_count == 0:
        return
    labels = rng.integers(0, 4, size=g.n)
    comms = [set(int(x) for x in g.nodes if labels[x] == c) for c in range(4)]
    comms = [c for c in comms if c]
    ref = nx.community.modularity(_nx(g), comms, weight="weight")
    assert modularity(g, labels) == pytest.approx(ref, abs=1e-12)


def test_weighted_modularity_matches_networkx(rng):
    g = random_graph(rng, 20, 0.3)
    u, v, _ = g.edges()
    w = rng.integers(1, 5, size=len(u))
    g = graph_from_edges(np.stack([u, v], 1), 20, weights=w)
    labels = rng.integers(0, 3, size=20)
    comms = [set(np.flatnonzero(labels == c).tolist()) & set(g.nodes.tolist()) for c in range(3)]
    ref = nx.community.modularity(_nx(g), [c for c in comms if c], weight="weight")
    assert modularity(g, labels) == pytest.approx(ref, abs=1e-12)


def test_two_triangles_half():
    g = graph_from_edges(_clique([0, 1, 2]) + _clique([3, 4, 5]))
    assert modularity(g, [0, 0, 0, 1, 1, 1]) == pytest.approx(0.5)
    assert louvain(g).modularity == pytest.approx(0.5)


def test_triangle_singletons():
    g = graph_from_edges(_clique([0, 1, 2]))
    assert modularity(g, [0, 1, 2]) == pytest.approx(-1 / 3)
    assert modularity(g, [0, 0, 0]) == pytest.approx(0.0)


def test_complete_graph_one_community():
    a = louvain(graph_from_edges(_clique(range(5))))
    assert a.num_communities == 1
    assert a.modularity == pytest.approx(0.0)


def test_exhaustive_optimum_two_cliques(two_cliques):
    best = max(modularity(two_cliques, [p[i] for i in range(8)]) for p in _partitions(list(range(8))))
    a = louvain(two_cliques)
    assert a.modularity == pytest.approx(best, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_planted_split_recovered(two_cliques, seed):
    a = louvain(two_cliques, seed=seed)
    m = a.membership
    assert len(set(m[:4])) == 1 and len(set(m[4:])) == 1 and m[0] != m[4]


def test_two_large_cliques():
    g = graph_from_edges(_clique(range(10)) + _clique(range(10, 20)) + [(9, 10)])
    a = louvain(g, seed=3)
    assert a.num_communities == 2
    assert sorted(a.sizes.tolist()) == [10, 10]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_history_non_decreasing_and_final_matches(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 40, 0.12)
    if g.edge_count == 0:
        return
    a = louvain(g, seed=seed)
    assert all(b >= x - 1e-12 for x, b in zip(a.history, a.history[1:]))
    assert a.modularity == pytest.approx(modularity(g, a))
    assert a.modularity >= a.history[0] - 1e-12


def test_louvain_close_to_networkx_on_random_graph(rng):
    g = random_graph(rng, 120, 0.05)
    ours = louvain(g, seed=1).modularity
    ref = nx.community.modularity(_nx(g), nx.community.louvain_communities(_nx(g), seed=1))
    assert ours >= ref - 0.03


def test_louvain_deterministic(rng):
    g = random_graph(rng, 60, 0.08)
    a, b = louvain(g, seed=7), louvain(g, seed=7)
    assert np.array_equal(a.labels, b.labels) and a.modularity == b.modularity


def test_isolated_nodes_excluded():
    g = graph_from_edges([(0, 1)], 4)
    a = louvain(g)
    assert a.nodes.tolist() == [0, 1]
    with pytest.raises(KeyError):
        a.community_of(3)


def test_empty_graph_rejected():
    with pytest.raises(ValueError):
        louvain(graph_from_edges([], 3))


def _assignment(labels):
    labels = np.asarray(labels)
    return CommunityAssignment(len(labels), np.arange(len(labels)), labels, 0.0)


def test_select_top_community_ties_by_smallest_member():
    a = _assignment([1, 1, 0, 0, 2])
    assert [c.tolist() for c in select_top_community(a, 2)] == [[0, 1], [2, 3]]
    with pytest.warns(UserWarning):
        out = select_top_community(a, 5)
    assert len(out) == 3
    with pytest.raises(ValueError):
        select_top_community(a, 0)


def test_intra_rate_example():
    a = _assignment([0, 0, 0, 1, 1])
    pairs = [(0, 1), (1, 2), (3, 4), (2, 3)]
    assert intra_rate(a, pairs) == 0.75
    assert label_pair_community(a, 2, 3) == "cross"


def test_assignment_roundtrip(tmp_path, two_cliques):
    a = louvain(two_cliques)
    idx = AuthorIndex([f"n{i}" for i in range(8)])
    write_assignment(a, tmp_path / "c.csv", tmp_path / "c.json", index=idx, header_lines=["# seed=0"])
    back = read_assignment(tmp_path / "c.csv", idx, 8)
    assert np.array_equal(back.membership, a.membership)
    assert "modularity" in (tmp_path / "c.json").read_text()
