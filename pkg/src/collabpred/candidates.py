"""2-hop candidate generation and the cold-start (zero common neighbour) analysis."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .graph import GraphSnapshot

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = (100, 1000, 10000)


@dataclass(frozen=True)
class CandidatePair:
    u: int
    v: int
    common_neighbor_count: int
    label: bool | None = None


def _scope_mask(train: GraphSnapshot, scope) -> np.ndarray:
    if scope is None:
        return train.degree > 0
    mask = np.zeros(train.n, dtype=bool)
    scope = np.asarray(scope, dtype=np.int64)
    if len(scope) and (scope.min() < 0 or scope.max() >= train.n):
        raise KeyError("scope contains nodes outside the snapshot")
    mask[scope] = True
    return mask


def _node_candidates(train: GraphSnapshot, u: int, in_scope: np.ndarray):
    """Partners ``v > u`` in scope that share a neighbour with ``u`` but are not adjacent."""
    lo, hi = train.indptr[u], train.indptr[u + 1]
    nb = train.indices[lo:hi]
    if len(nb) == 0:
        return None
    ip = train.indptr
    second = np.concatenate([train.indices[ip[w]:ip[w + 1]] for w in nb])
    second = second[(second > u)]
    second = second[in_scope[second]]
    if len(second) == 0:
        return None
    vals, counts = np.unique(second, return_counts=True)
    pos = np.searchsorted(nb, vals)
    adjacent = (pos < len(nb)) & (nb[np.minimum(pos, len(nb) - 1)] == vals)
    keep = ~adjacent
    return vals[keep], counts[keep]


def generate_candidates(train: GraphSnapshot, scope=None) -> Iterator[CandidatePair]:
    """Stream every non-adjacent in-scope pair with at least one common neighbour.

    Each unordered pair is produced exactly once, by its smaller endpoint, so
    only one node's 2-hop shell is held in memory at a time.
    """
    in_scope = _scope_mask(train, scope)
    for u in np.flatnonzero(in_scope):
        res = _node_candidates(train, int(u), in_scope)
        if res is None:
            continue
        for v, c in zip(*res):
            yield CandidatePair(int(u), int(v), int(c))


def _shard(args):
    train, in_scope, nodes = args
    us, vs, cs = [], [], []
    for u in nodes:
        res = _node_candidates(train, int(u), in_scope)
        if res is None:
            continue
        us.append(np.full(len(res[0]), u, dtype=np.int64))
        vs.append(res[0])
        cs.append(res[1])
    if not us:
        z = np.zeros(0, dtype=np.int64)
        return z, z.copy(), z.copy()
    return np.concatenate(us), np.concatenate(vs).astype(np.int64), np.concatenate(cs).astype(np.int64)


def candidate_arrays(train: GraphSnapshot, scope=None, workers: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All candidates as ``(u, v, cn)`` arrays sorted by ``(u, v)``.

    With ``workers > 1`` the source nodes are dealt round-robin to processes;
    the min-endpoint ownership rule means shards never overlap.
    """
    in_scope = _scope_mask(train, scope)
    nodes = np.flatnonzero(in_scope)
    if workers <= 1 or len(nodes) < 2 * workers:
        u, v, c = _shard((train, in_scope, nodes))
    else:
        shards = [(train, in_scope, nodes[i::workers]) for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_shard, shards))
        u = np.concatenate([p[0] for p in parts])
        v = np.concatenate([p[1] for p in parts])
        c = np.concatenate([p[2] for p in parts])
    order = np.lexsort((v, u))
    return u[order], v[order], c[order]


def pair_keys(pairs, n: int) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    lo, hi = pairs.min(axis=1), pairs.max(axis=1)
    return lo * n + hi


def label_pairs(pairs, positive_keys: np.ndarray, n: int) -> np.ndarray:
    """``True`` where the pair's canonical key is in ``positive_keys``."""
    return np.isin(pair_keys(pairs, n), positive_keys)


def common_neighbor_counts(train: GraphSnapshot, pairs) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        return np.zeros(0, dtype=np.int64)
    A = train.csr()
    return np.asarray(A[pairs[:, 0]].multiply(A[pairs[:, 1]]).sum(axis=1)).ravel().astype(np.int64)


def partition_cold_start(train: GraphSnapshot, new_edges) -> tuple[np.ndarray, np.ndarray]:
    """Split new edges into 2-hop reachable pairs and cold-start pairs."""
    pairs = np.asarray(new_edges, dtype=np.int64).reshape(-1, 2)
    reach = common_neighbor_counts(train, pairs) > 0
    return pairs[reach], pairs[~reach]


def recall_ceiling(train: GraphSnapshot, new_edges) -> float:
    """Fraction of new edges whose endpoints share a training neighbour."""
    pairs = np.asarray(new_edges, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        raise ValueError("no new edges")
    two_hop, _ = partition_cold_start(train, pairs)
    return len(two_hop) / len(pairs)


def default_degree_bins(max_exp: int = 10) -> list[tuple[int, float]]:
    """``[1], [2,3], [4,7], ..., [2**max_exp, inf)``."""
    bins = [(1 << e, (1 << (e + 1)) - 1) for e in range(max_exp)]
    bins.append((1 << max_exp, math.inf))
    return bins


def top_k_authors(train: GraphSnapshot, k: int) -> np.ndarray:
    """Highest-degree authors, ties broken by smaller index."""
    order = np.lexsort((np.arange(train.n), -train.degree))
    order = order[train.degree[order] > 0]
    return np.sort(order[:k])


def shortest_path_lengths(train: GraphSnapshot, pairs, budget: int = 1 << 24) -> np.ndarray:
    """Hop distance for each pair by breadth-first search (``inf`` if disconnected)."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    out = np.full(len(pairs), np.inf)
    if len(pairs) == 0 or train.edge_count == 0:
        return out
    A = train.csr()
    sources = np.unique(pairs[:, 0])
    step = max(1, budget // max(train.n, 1))
    for s in range(0, len(sources), step):
        src = sources[s:s + step]
        dist = shortest_path(A, directed=False, unweighted=True, indices=src)
        row = np.searchsorted(src, pairs[:, 0])
        sel = (row < len(src)) & (src[np.minimum(row, len(src) - 1)] == pairs[:, 0])
        out[sel] = dist[row[sel], pairs[sel, 1]]
    return out


def _rate(num: int, den: int) -> float | None:
    return num / den if den else None


@dataclass
class ColdStartStats:
    new_edges: int
    two_hop: int
    cold: int
    ceiling: float
    cold_rate_by_degree_bin: list[dict] = field(default_factory=list)
    topk_sweep: list[dict] = field(default_factory=list)
    path_length_histogram: dict[str, int] = field(default_factory=dict)
    median_cold_distance: float | None = None
    cross_community_rate: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def cold_start_profile(train: GraphSnapshot, new_edges, degree_bins: Sequence[tuple[int, float]] | None = None,
                       k_list: Sequence[int] = DEFAULT_TOP_K, assignment=None) -> ColdStartStats:
    """Degree, top-K, distance and community breakdown of cold-start new edges."""
    pairs = np.asarray(new_edges, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        raise ValueError("no new edges")
    cold = common_neighbor_counts(train, pairs) == 0
    deg = train.degree
    stats = ColdStartStats(new_edges=len(pairs), two_hop=int((~cold).sum()), cold=int(cold.sum()),
                           ceiling=float((~cold).sum() / len(pairs)))

    mind = np.minimum(deg[pairs[:, 0]], deg[pairs[:, 1]])
    bins = list(degree_bins) if degree_bins is not None else default_degree_bins()
    if np.any(mind == 0) and not any(lo <= 0 for lo, _ in bins):
        bins = [(0, 0)] + bins
    for lo, hi in bins:
        sel = (mind >= lo) & (mind <= hi)
        n_sel = int(sel.sum())
        stats.cold_rate_by_degree_bin.append({
            "bin": [int(lo), None if math.isinf(hi) else int(hi)],
            "new_edges": n_sel, "cold": int(cold[sel].sum()), "rate": _rate(int(cold[sel].sum()), n_sel)})

    for k in k_list:
        top = np.zeros(train.n, dtype=bool)
        top[top_k_authors(train, int(k))] = True
        sel = top[pairs[:, 0]] & top[pairs[:, 1]]
        n_sel = int(sel.sum())
        stats.topk_sweep.append({"K": int(k), "new_edges": n_sel, "cold_count": int(cold[sel].sum()),
                                 "cold_rate": _rate(int(cold[sel].sum()), n_sel)})

    dist = shortest_path_lengths(train, pairs[cold])
    hist: dict[str, int] = {}
    for d in np.sort(dist[np.isfinite(dist)]).astype(np.int64):
        hist[str(int(d))] = hist.get(str(int(d)), 0) + 1
    n_inf = int(np.isinf(dist).sum())
    if n_inf:
        hist["inf"] = n_inf
    stats.path_length_histogram = hist
    if len(dist):
        stats.median_cold_distance = float(np.median(dist))

    if assignment is not None:
        memb = assignment.membership
        cu, cv = memb[pairs[:, 0]], memb[pairs[:, 1]]
        known = (cu >= 0) & (cv >= 0)
        cross = known & (cu != cv)
        stats.cross_community_rate = {
            "cold": _rate(int((cross & cold).sum()), int((known & cold).sum())),
            "two_hop": _rate(int((cross & ~cold).sum()), int((known & ~cold).sum())),
            "unassigned_pairs": int((~known).sum()),
        }
    return stats


def sample_cold_start(train: GraphSnapshot, new_edges, k: int = 1000, total: int = 500,
                      seed: int = 0, max_tries: int = 1000) -> tuple[np.ndarray, np.ndarray]:
    """Cold-start evaluation set among the top-``k`` authors.

    Positives are the cold-start new edges between top-``k`` authors (a
    uniform subset when they would fill more than half the sample).  The
    remaining ``total - positives`` slots are negatives drawn uniformly from
    top-``k`` pairs that are non-adjacent, share no neighbour and are not new.
    """
    rng = np.random.default_rng(seed)
    n = train.n
    top = top_k_authors(train, k)
    pairs = np.asarray(new_edges, dtype=np.int64).reshape(-1, 2)
    in_top = np.zeros(n, dtype=bool)
    in_top[top] = True
    sel = in_top[pairs[:, 0]] & in_top[pairs[:, 1]]
    _, cold = partition_cold_start(train, pairs[sel])
    pos = cold[np.lexsort((cold[:, 1], cold[:, 0]))] if len(cold) else cold
    if len(pos) > total // 2:
        # keep both classes present: at most half the sample is positive
        pos = pos[np.sort(rng.choice(len(pos), size=total // 2, replace=False))]
    new_keys = set(pair_keys(pairs, n).tolist())
    want = max(total - len(pos), 0)
    neg: list[tuple[int, int]] = []
    seen: set[int] = set()
    max_pairs = len(top) * (len(top) - 1) // 2
    tries = 0
    while len(neg) < want and len(seen) < max_pairs and tries < max_tries * max(want, 1):
        tries += 1
        a, b = rng.choice(top, size=2, replace=False)
        a, b = (int(a), int(b)) if a < b else (int(b), int(a))
        key = a * n + b
        if key in seen:
            continue
        seen.add(key)
        if key in new_keys or train.has_edge(a, b):
            continue
        if len(np.intersect1d(train.neighbors(a), train.neighbors(b), assume_unique=True)):
            continue
        neg.append((a, b))
    if len(neg) < want:
        logger.warning("cold-start sample: only %d of %d negatives available", len(neg), want)
    neg_arr = np.array(neg, dtype=np.int64).reshape(-1, 2)
    out = np.concatenate([pos, neg_arr])
    labels = np.concatenate([np.ones(len(pos), dtype=bool), np.zeros(len(neg_arr), dtype=bool)])
    return out, labels


def write_candidates(u, v, cn, labels, path: str | Path, index=None, header_lines: Sequence[str] = ()) -> None:
    name = (lambda i: index.id_of(int(i))) if index is not None else str
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v", "cn", "label"])
        for a, b, c, y in zip(u, v, cn, labels):
            w.writerow([name(a), name(b), int(c), int(bool(y))])
