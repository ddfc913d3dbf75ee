import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from collabpred.candidates import (candidate_arrays, cold_start_profile, common_neighbor_counts,
                                   default_degree_bins, generate_candidates, label_pairs, pair_keys,
                                   partition_cold_start, recall_ceiling, sample_cold_start,
                                   shortest_path_lengths, top_k_authors, write_candidates)
from collabpred.community import CommunityAssignment
from collabpred.eras import DEFAULT_ERAS, EdgeClass, classify_edges
from collabpred.graph import build_snapshot
from collabpred.synthetic import SynthConfig, generate

from conftest import adjacency_sets, graph_from_edges, random_graph


def _brute(g, scope=None):
    adj = adjacency_sets(g)
    nodes = sorted(scope) if scope is not None else [u for u in range(g.n) if adj[u]]
    out = {}
    for i, u in enumerate(nodes):
        for v in nodes[i + 1:]:
            if v in adj[u]:
                continue
            c = len(adj[u] & adj[v])
            if c:
                out[(u, v)] = c
    return out


def _stream(g, scope=None):
    return {(p.u, p.v): p.common_neighbor_count for p in generate_candidates(g, scope)}


def test_matches_brute_force_on_random_graphs():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        n = int(rng.integers(2, 61))
        g = random_graph(rng, n, float(rng.uniform(0.02, 0.3)))
        expected = _brute(g)
        got = list(generate_candidates(g))
        assert len(got) == len(expected)  # each pair exactly once
        assert {(p.u, p.v): p.common_neighbor_count for p in got} == expected


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_scope_restriction(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 30, 0.15)
    scope = sorted(set(rng.choice(30, size=12, replace=False).tolist()))
    assert _stream(g, scope) == _brute(g, scope)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_never_yields_adjacent_pairs(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 25, 0.25)
    adj = adjacency_sets(g)
    for p in generate_candidates(g):
        assert p.v not in adj[p.u] and p.u < p.v


def test_hand_examples():
    assert _stream(graph_from_edges([(0, 1), (1, 2), (0, 2)])) == {}
    assert _stream(graph_from_edges([(0, 1), (0, 2), (0, 3)])) == {(1, 2): 1, (1, 3): 1, (2, 3): 1}
    assert _stream(graph_from_edges([(0, 1), (1, 2), (2, 3)])) == {(0, 2): 1, (1, 3): 1}


def test_scope_outside_snapshot():
    with pytest.raises(KeyError):
        list(generate_candidates(graph_from_edges([(0, 1)]), [5]))


def test_arrays_sorted_and_workers_equivalent(rng):
    g = random_graph(rng, 80, 0.08)
    u1, v1, c1 = candidate_arrays(g)
    u4, v4, c4 = candidate_arrays(g, workers=4)
    assert np.array_equal(u1, u4) and np.array_equal(v1, v4) and np.array_equal(c1, c4)
    keys = u1 * g.n + v1
    assert np.all(np.diff(keys) > 0)
    assert dict(zip(zip(u1.tolist(), v1.tolist()), c1.tolist())) == _brute(g)


def test_common_neighbor_counts_match(rng):
    g = random_graph(rng, 30, 0.2)
    pairs = rng.integers(0, 30, size=(100, 2))
    adj = adjacency_sets(g)
    assert common_neighbor_counts(g, pairs).tolist() == [len(adj[a] & adj[b]) for a, b in pairs]


def test_pair_keys_and_labels():
    assert pair_keys([(3, 1), (1, 3)], 10).tolist() == [13, 13]
    assert label_pairs([(1, 3), (2, 4)], np.array([13]), 10).tolist() == [True, False]


def test_recall_ceiling_examples():
    g = graph_from_edges([(0, 1), (1, 2), (3, 4), (5, 6), (7, 8), (9, 10)], 11)
    new = [(0, 2), (3, 5), (4, 7), (6, 9), (8, 10)]
    assert recall_ceiling(g, new) == pytest.approx(0.2)
    clique = graph_from_edges([(0, 1), (0, 2), (0, 3)], 4)
    assert recall_ceiling(clique, [(1, 2), (2, 3)]) == 1.0
    assert recall_ceiling(graph_from_edges([(0, 1), (2, 3)]), [(0, 2)]) == 0.0
    with pytest.raises(ValueError, match="no new edges"):
        recall_ceiling(g, [])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_partition_is_exhaustive(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 30, 0.1)
    new = rng.integers(0, 30, size=(40, 2))
    new = new[new[:, 0] != new[:, 1]]
    if len(new) == 0:
        return
    two, cold = partition_cold_start(g, new)
    assert len(two) + len(cold) == len(new)
    assert recall_ceiling(g, new) + len(cold) / len(new) == 1.0


def test_path_distance_and_infinite_bucket():
    g = graph_from_edges([(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (6, 7), (8, 9)], 10)
    assert shortest_path_lengths(g, [(0, 5), (6, 8), (0, 2)]).tolist() == [5.0, math.inf, 2.0]
    memb = CommunityAssignment(10, np.arange(10), np.array([0, 0, 0, 1, 1, 1, 2, 2, 3, 3]), 0.0)
    s = cold_start_profile(g, [(0, 5), (7, 9)], assignment=memb)
    assert s.cold == 2 and s.ceiling == 0.0
    assert s.path_length_histogram == {"5": 1, "inf": 1}
    assert s.cross_community_rate["cold"] == 1.0


def test_degree_bin_rate():
    # ten leaves of degree 1 hanging off ten hubs; nine pairs share nothing, one pair shares a hub
    edges = [(i, 20 + i) for i in range(10)] + [(10 + i, 20 + i) for i in range(10)]
    g = graph_from_edges(edges + [(0, 20 + 9)], 30)  # degree bump on leaf 0 only
    new = [(i, 10 + (i + 1) % 10) for i in range(1, 10)] + [(19, 9)]
    s = cold_start_profile(g, new, degree_bins=[(1, 1), (2, 3)], k_list=())
    assert s.cold_rate_by_degree_bin[0] == {"bin": [1, 1], "new_edges": 10, "cold": 9, "rate": 0.9}


def test_degree_zero_bin_added():
    g = graph_from_edges([(0, 1)], 3)
    s = cold_start_profile(g, [(0, 2)], k_list=())
    assert s.cold_rate_by_degree_bin[0]["bin"] == [0, 0]
    assert s.cold_rate_by_degree_bin[0]["rate"] == 1.0


def test_default_bins_powers_of_two():
    bins = default_degree_bins()
    assert bins[:3] == [(1, 1), (2, 3), (4, 7)]
    assert bins[-1] == (1024, math.inf)


def test_top_k_authors_ties():
    g = graph_from_edges([(0, 1), (2, 3), (2, 4), (5, 6)], 8)
    assert top_k_authors(g, 2).tolist() == [0, 2]
    assert len(top_k_authors(g, 100)) == 7


def test_topk_sweep_counts():
    g = graph_from_edges([(0, 1), (0, 2), (0, 3), (4, 5), (4, 6)], 7)
    s = cold_start_profile(g, [(1, 2), (0, 4)], k_list=(2, 7))
    assert s.topk_sweep[0] == {"K": 2, "new_edges": 1, "cold_count": 1, "cold_rate": 1.0}
    assert s.topk_sweep[1]["new_edges"] == 2 and s.topk_sweep[1]["cold_rate"] == 0.5


@pytest.fixture(scope="module")
def synth_edges():
    return generate(SynthConfig())[0]


def test_cold_rate_non_increasing_on_synthetic(synth_edges):
    for era in DEFAULT_ERAS:
        train = build_snapshot(synth_edges, list(era.train_windows))
        ev = build_snapshot(synth_edges, era.eval_window)
        new = classify_edges(train, ev).pairs(EdgeClass.NEW)
        new = new[(train.degree[new[:, 0]] > 0) & (train.degree[new[:, 1]] > 0)]
        rates = [b["rate"] for b in cold_start_profile(train, new, k_list=()).cold_rate_by_degree_bin
                 if b["new_edges"] >= 10]
        assert len(rates) >= 4
        assert all(b <= a for a, b in zip(rates, rates[1:])), (era.name, rates)


def test_sample_cold_start(synth_edges):
    era = DEFAULT_ERAS[2]
    train = build_snapshot(synth_edges, list(era.train_windows))
    new = classify_edges(train, build_snapshot(synth_edges, era.eval_window)).pairs(EdgeClass.NEW)
    pairs, labels = sample_cold_start(train, new, k=300, total=200, seed=5)
    assert len(pairs) == 200 and 0 < labels.sum() <= 100
    top = set(top_k_authors(train, 300).tolist())
    assert all(a in top and b in top for a, b in pairs)
    assert np.all(common_neighbor_counts(train, pairs) == 0)
    assert not any(train.has_edge(int(a), int(b)) for a, b in pairs)
    new_keys = set(pair_keys(new, train.n).tolist())
    assert [k in new_keys for k in pair_keys(pairs, train.n).tolist()] == labels.tolist()
    again, _ = sample_cold_start(train, new, k=300, total=200, seed=5)
    assert np.array_equal(pairs, again)


def test_write_candidates(tmp_path):
    write_candidates([0], [2], [1], [True], tmp_path / "c.csv", header_lines=["# x=1"])
    assert (tmp_path / "c.csv").read_text().splitlines() == ["# x=1", "u,v,cn,label", "0,2,1,1"]
