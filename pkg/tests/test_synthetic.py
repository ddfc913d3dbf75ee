import numpy as np

from collabpred.eras import window_stats
from collabpred.graph import ingest_edges, ingest_profiles
from collabpred.synthetic import SynthConfig, generate, write_dataset


def test_generator_deterministic():
    cfg = SynthConfig(authors=300, seed=5)
    e1, p1 = generate(cfg)
    e2, p2 = generate(cfg)
    assert np.array_equal(e1.u, e2.u) and np.array_equal(e1.year, e2.year) and p1 == p2
    e3, _ = generate(SynthConfig(authors=300, seed=6))
    assert len(e3) != len(e1) or not np.array_equal(e3.u, e1.u)


def test_generator_shape():
    cfg = SynthConfig(authors=400, seed=1)
    edges, profiles = generate(cfg)
    assert edges.years[0] >= cfg.first_year and edges.years[1] <= cfg.last_year
    assert np.all(edges.u < edges.v)
    assert len(profiles) == cfg.authors
    # every author that appears in an edge has a profile
    assert set(edges.index.ids) <= {p.id for p in profiles}
    for p in profiles:
        assert p.works_count == sum(w for w, _ in p.counts_by_year.values())
        assert 3 <= len(p.concepts) <= 6


def test_late_boost_raises_edge_growth():
    edges, _ = generate(SynthConfig(authors=1000, seed=2))
    stats = window_stats(edges, [(y, y + 1) for y in range(2004, 2024, 2)])
    growth = {s.window[0]: s.edge_growth for s in stats}
    assert growth[2018] > max(growth[y] for y in (2012, 2014, 2016))


def test_write_dataset_roundtrip(tmp_path):
    ep, pp = write_dataset(SynthConfig(authors=200, seed=3), tmp_path)
    edges = ingest_edges(ep)
    profiles = ingest_profiles(pp)
    assert len(edges.index) <= len(profiles) == 200
