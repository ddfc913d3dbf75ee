import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from collabpred.embeddings import (OPERATORS, EmbeddingConfig, EmbeddingTable, WalkCorpus, generate_walks,
                                   init_vectors, node2vec, score_pair_embedding, score_pairs, sgns_loss_and_grad,
                                   sgns_step, train_skipgram, transition_weights)

from conftest import adjacency_sets, graph_from_edges, random_graph

SMALL = dict(dimension=16, walk_length=20, walks_per_node=10, window=5, epochs=3)


def _two_cliques(k=10):
    edges = list(itertools.combinations(range(k), 2)) + list(itertools.combinations(range(k, 2 * k), 2))
    return graph_from_edges(edges + [(k - 1, k)])


def _loss(h, c, negs):
    return sgns_loss_and_grad(h, c, negs)[0]


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    eps = 1e-6
    for _ in range(100):
        d = int(rng.integers(2, 9))
        h, c = rng.normal(size=d), rng.normal(size=d)
        negs = rng.normal(size=(int(rng.integers(1, 4)), d))
        _, g_h, g_c, g_n = sgns_loss_and_grad(h, c, negs)
        for target, grad in ((h, g_h), (c, g_c)):
            for i in range(d):
                old = target[i]
                target[i] = old + eps
                up = _loss(h, c, negs)
                target[i] = old - eps
                down = _loss(h, c, negs)
                target[i] = old
                fd = (up - down) / (2 * eps)
                assert abs(fd - grad[i]) <= 1e-5 * max(1.0, abs(fd))
        for k in range(len(negs)):
            for i in range(d):
                old = negs[k, i]
                negs[k, i] = old + eps
                up = _loss(h, c, negs)
                negs[k, i] = old - eps
                down = _loss(h, c, negs)
                negs[k, i] = old
                assert abs((up - down) / (2 * eps) - g_n[k, i]) <= 1e-5 * max(1.0, abs(g_n[k, i]))


def test_training_step_is_gradient_descent():
    rng = np.random.default_rng(1)
    w_in, w_out = rng.normal(size=(5, 4)), rng.normal(size=(5, 4))
    _, g_h, g_c, g_n = sgns_loss_and_grad(w_in[0], w_out[1], w_out[[3]])
    exp_in, exp_out = w_in.copy(), w_out.copy()
    exp_in[0] -= 0.1 * g_h
    exp_out[1] -= 0.1 * g_c
    exp_out[3] -= 0.1 * g_n[0]
    sgns_step(w_in, w_out, 0, 1, [3], 0.1)
    assert np.allclose(w_in, exp_in, atol=1e-12) and np.allclose(w_out, exp_out, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([(1.0, 1.0), (0.25, 4.0), (4.0, 0.25)]))
def test_every_walk_step_is_an_edge(seed, pq):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 25, 0.15)
    if g.edge_count == 0:
        return
    adj = adjacency_sets(g)
    corpus = generate_walks(g, EmbeddingConfig(walk_length=12, walks_per_node=3, p=pq[0], q=pq[1], seed=seed))
    assert len(corpus) == 3 * len(g.nodes)
    for walk in corpus:
        assert len(walk) == 12
        for a, b in zip(walk, walk[1:]):
            assert b in adj[a]


def test_forced_step_on_single_neighbor():
    g = graph_from_edges([(0, 1)])
    corpus = generate_walks(g, EmbeddingConfig(walk_length=4, walks_per_node=1), nodes=[0])
    assert list(corpus)[0] == [0, 1, 0, 1]


def test_uniform_step_distribution():
    g = graph_from_edges([(0, i) for i in range(1, 5)])
    n = 100_000
    corpus = generate_walks(g, EmbeddingConfig(walk_length=2, walks_per_node=n, seed=3), nodes=[0])
    counts = np.bincount(corpus.walks[:, 1], minlength=5)[1:]
    sigma = np.sqrt(n * 0.25 * 0.75)
    assert np.all(np.abs(counts - n / 4) < 3 * sigma)


def test_return_bias_on_triangle():
    g = graph_from_edges([(0, 1), (1, 2), (0, 2)])
    assert transition_weights(g, 0, 1, 0.25, 1.0).tolist() == [4.0, 1.0]
    n = 50_000
    corpus = generate_walks(g, EmbeddingConfig(walk_length=3, walks_per_node=n, p=0.25, seed=4), nodes=[0])
    ret = np.mean(corpus.walks[:, 2] == 0)
    sigma = np.sqrt(0.8 * 0.2 / n)
    assert abs(ret - 0.8) < 4 * sigma


def test_in_out_weights():
    # 0-1-2 path plus 0-3: from 1 (prev 0) moving to 2 is an outward step
    g = graph_from_edges([(0, 1), (1, 2), (1, 3), (0, 3)])
    assert transition_weights(g, 0, 1, 1.0, 0.5).tolist() == [1.0, 2.0, 1.0]


def test_walks_deterministic():
    g = _two_cliques(5)
    cfg = EmbeddingConfig(walk_length=10, walks_per_node=2, p=0.5, q=2.0, seed=9)
    assert np.array_equal(generate_walks(g, cfg).walks, generate_walks(g, cfg).walks)


def test_config_validation():
    for bad in (dict(dimension=0), dict(walk_length=1), dict(p=0), dict(q=-1)):
        with pytest.raises(ValueError):
            EmbeddingConfig(**bad)


def test_zero_epochs_returns_initialisation():
    g = _two_cliques(4)
    cfg = EmbeddingConfig(dimension=8, walk_length=5, walks_per_node=1, epochs=0, seed=2)
    t = node2vec(g, cfg)
    w_in, _ = init_vectors(len(t.nodes), 8, 2)
    assert np.array_equal(t.vectors, w_in)


def test_empty_corpus_rejected():
    with pytest.raises(ValueError, match="empty corpus"):
        train_skipgram(WalkCorpus(np.zeros((0, 3), np.int64), np.zeros(0, np.int64)), EmbeddingConfig())


def _separation(t, k=10):
    intra, inter = [], []
    for a, b in itertools.combinations(range(2 * k), 2):
        s = score_pair_embedding(t, a, b)
        (intra if (a < k) == (b < k) else inter).append(s)
    return np.mean(intra), np.mean(inter)


@pytest.mark.parametrize("workers", [1, 2])
def test_two_clique_separation(workers):
    t = node2vec(_two_cliques(), EmbeddingConfig(seed=11, workers=workers, **SMALL))
    intra, inter = _separation(t)
    assert intra > inter
    assert np.all(np.isfinite(t.vectors))


def test_single_worker_training_deterministic():
    cfg = EmbeddingConfig(seed=5, **SMALL)
    a, b = node2vec(_two_cliques(), cfg), node2vec(_two_cliques(), cfg)
    assert np.array_equal(a.vectors, b.vectors)


def test_table_roundtrip(tmp_path):
    t = EmbeddingTable(np.array([3, 7]), np.array([[1.0, 2.0], [3.0, 4.0]]))
    t.save(tmp_path / "e.bin")
    back = EmbeddingTable.load(tmp_path / "e.bin")
    assert back.nodes.tolist() == [3, 7] and np.array_equal(back.vectors, t.vectors)
    t.save_csv(tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().splitlines()[1] == "3,1.0,2.0"
    (tmp_path / "bad.bin").write_bytes(b"nope")
    with pytest.raises(ValueError):
        EmbeddingTable.load(tmp_path / "bad.bin")


def test_operator_examples():
    t = EmbeddingTable(np.array([0, 1, 2, 3]), np.array([[1.0, 2.0], [3.0, 4.0], [1.0, 0.0], [0.0, 1.0]]))
    assert score_pair_embedding(t, 0, 1, "hadamard_dot") == 11
    assert score_pair_embedding(t, 0, 1, "neg_l1") == -4
    assert score_pair_embedding(t, 0, 0, "cosine") == pytest.approx(1.0)
    assert score_pair_embedding(t, 0, 0, "neg_l2") == 0.0
    assert score_pair_embedding(t, 2, 3, "cosine") == 0.0
    with pytest.raises(ValueError):
        score_pair_embedding(t, 0, 1, "concat")
    with pytest.raises(KeyError, match="not embedded"):
        score_pair_embedding(t, 0, 9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_operator_symmetry(seed):
    rng = np.random.default_rng(seed)
    t = EmbeddingTable(np.arange(6), rng.normal(size=(6, 5)))
    pairs = rng.integers(0, 6, size=(10, 2))
    for op in OPERATORS:
        assert np.allclose(score_pairs(t, pairs, op), score_pairs(t, pairs[:, ::-1], op), atol=1e-12)
        assert score_pairs(t, pairs[:1], op)[0] == pytest.approx(score_pair_embedding(t, *pairs[0], op))


def test_score_pairs_missing_is_nan():
    t = EmbeddingTable(np.array([0, 1]), np.eye(2))
    out = score_pairs(t, [(0, 1), (0, 5)])
    assert out[0] == 0.0 and np.isnan(out[1])
