"""Louvain community detection and community-level helpers."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .graph import GraphSnapshot

TOLERANCE = 1e-7


@dataclass
class CommunityAssignment:
    """Community id for every node of a snapshot (nodes with degree > 0)."""

    n: int
    nodes: np.ndarray
    labels: np.ndarray
    modularity: float
    history: list[float] = field(default_factory=list)
    resolution: float = 1.0

    def __post_init__(self):
        self.membership = np.full(self.n, -1, dtype=np.int64)
        self.membership[self.nodes] = self.labels

    def community_of(self, u: int) -> int:
        c = int(self.membership[u]) if 0 <= u < self.n else -1
        if c < 0:
            raise KeyError(f"node {u} has no community")
        return c

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels) if len(self.labels) else np.zeros(0, dtype=np.int64)

    @property
    def num_communities(self) -> int:
        return len(self.sizes)

    def as_dict(self) -> dict[int, int]:
        return {int(u): int(c) for u, c in zip(self.nodes, self.labels)}

    def members(self, c: int) -> np.ndarray:
        return self.nodes[self.labels == c]


def _as_membership(graph: GraphSnapshot, assignment) -> np.ndarray:
    if isinstance(assignment, CommunityAssignment):
        memb = assignment.membership
    elif isinstance(assignment, Mapping):
        memb = np.full(graph.n, -1, dtype=np.int64)
        for u, c in assignment.items():
            memb[int(u)] = int(c)
    else:
        memb = np.asarray(assignment, dtype=np.int64)
    missing = graph.nodes[memb[graph.nodes] < 0] if len(memb) == graph.n else graph.nodes
    if len(memb) != graph.n or len(missing):
        raise KeyError(f"assignment does not cover node(s) {missing[:5].tolist()}")
    return memb


def modularity(graph: GraphSnapshot, assignment, resolution: float = 1.0) -> float:
    """Weighted Newman modularity of a partition of ``graph``'s nodes."""
    memb = _as_membership(graph, assignment)
    u, v, w = graph.edges()
    w = w.astype(np.float64)
    m2 = 2.0 * w.sum()
    if m2 == 0:
        raise ValueError("modularity undefined on a graph without edges")
    strength = np.bincount(u, weights=w, minlength=graph.n) + np.bincount(v, weights=w, minlength=graph.n)
    labels = memb[graph.nodes]
    _, lab = np.unique(labels, return_inverse=True)
    ncom = lab.max() + 1
    remap = np.full(graph.n, -1, dtype=np.int64)
    remap[graph.nodes] = lab
    same = remap[u] == remap[v]
    inner = np.bincount(remap[u][same], weights=2.0 * w[same], minlength=ncom)
    tot = np.bincount(lab, weights=strength[graph.nodes], minlength=ncom)
    return float(np.sum(inner / m2 - resolution * (tot / m2) ** 2))


class _Level:
    """Weighted graph at one aggregation level: neighbor dicts + self-loop mass."""

    def __init__(self, adj: list[dict[int, float]], loops: np.ndarray):
        self.adj = adj
        self.loops = loops
        self.k = np.array([sum(a.values()) for a in adj], dtype=np.float64) + loops
        self.m2 = float(self.k.sum())

    def __len__(self):
        return len(self.adj)

    def quality(self, comm: np.ndarray, resolution: float) -> float:
        ncom = int(comm.max()) + 1
        inner = np.bincount(comm, weights=self.loops, minlength=ncom)
        for i, nbrs in enumerate(self.adj):
            ci = comm[i]
            for j, w in nbrs.items():
                if comm[j] == ci:
                    inner[ci] += w
        tot = np.bincount(comm, weights=self.k, minlength=ncom)
        return float(np.sum(inner / self.m2 - resolution * (tot / self.m2) ** 2))

    def aggregate(self, comm: np.ndarray) -> "_Level":
        ncom = int(comm.max()) + 1
        adj: list[dict[int, float]] = [dict() for _ in range(ncom)]
        loops = np.bincount(comm, weights=self.loops, minlength=ncom)
        for i, nbrs in enumerate(self.adj):
            ci = comm[i]
            row = adj[ci]
            for j, w in nbrs.items():
                cj = comm[j]
                if cj == ci:
                    loops[ci] += w
                else:
                    row[cj] = row.get(cj, 0.0) + w
        return _Level(adj, loops)


def _renumber(comm: np.ndarray) -> np.ndarray:
    _, first = np.unique(comm, return_index=True)
    remap = np.empty(comm.max() + 1, dtype=np.int64)
    remap[comm[np.sort(first)]] = np.arange(len(first))
    return remap[comm]


def _local_moves(level: _Level, rng: np.random.Generator, resolution: float, tol: float) -> np.ndarray:
    n = len(level)
    comm = np.arange(n)
    tot = level.k.copy()
    k, m2 = level.k, level.m2
    q = level.quality(comm, resolution)
    while True:
        moved = 0
        for i in rng.permutation(n):
            ci = comm[i]
            ki = k[i]
            links: dict[int, float] = {}
            for j, w in level.adj[i].items():
                c = comm[j]
                links[c] = links.get(c, 0.0) + w
            tot[ci] -= ki
            stay = links.get(ci, 0.0) - resolution * tot[ci] * ki / m2
            best, best_gain = ci, stay
            for c in sorted(links):
                gain = links[c] - resolution * tot[c] * ki / m2
                if gain > best_gain or (gain == best_gain and c < best and gain > stay):
                    best, best_gain = c, gain
            if best_gain <= stay:
                best = ci
            tot[best] += ki
            if best != ci:
                comm[i] = best
                moved += 1
        q_new = level.quality(comm, resolution)
        if moved == 0 or q_new - q < tol:
            break
        q = q_new
    return _renumber(comm)


def louvain(graph: GraphSnapshot, seed: int = 0, resolution: float = 1.0,
            tol: float = TOLERANCE) -> CommunityAssignment:
    """Greedy modularity maximisation by local moves and graph aggregation.

    Nodes are visited in a seeded random order on every sweep.  A node moves to
    the neighbouring community with the largest strictly positive gain, ties
    going to the lowest community id.  Passes stop once a pass improves
    modularity by less than ``tol``.
    """
    if graph.edge_count == 0:
        raise ValueError("louvain needs a graph with at least one edge")
    rng = np.random.default_rng(seed)
    nodes = graph.nodes
    local = np.full(graph.n, -1, dtype=np.int64)
    local[nodes] = np.arange(len(nodes))
    adj = []
    for u in nodes:
        nb = graph.neighbors(u)
        w = graph.neighbor_weights(u)
        adj.append({int(local[j]): float(x) for j, x in zip(nb, w)})
    level = _Level(adj, np.zeros(len(nodes)))
    membership = np.arange(len(nodes))
    history = [level.quality(membership, resolution)]
    while True:
        comm = _local_moves(level, rng, resolution, tol)
        if comm.max() + 1 == len(level):
            break
        q_new = level.quality(comm, resolution)
        membership = comm[membership]
        history.append(q_new)
        if q_new - history[-2] < tol:
            break
        level = level.aggregate(comm)
    labels = _renumber(membership)
    out = CommunityAssignment(graph.n, nodes.copy(), labels, 0.0, history, resolution)
    out.modularity = modularity(graph, out, resolution)
    return out


def select_top_community(assignment: CommunityAssignment, k: int = 1) -> list[np.ndarray]:
    """The ``k`` largest communities, ties broken by smallest member index."""
    if k < 1:
        raise ValueError("k must be >= 1")
    sizes = assignment.sizes
    if k > len(sizes):
        warnings.warn(f"requested {k} communities but only {len(sizes)} exist", stacklevel=2)
    first = np.full(len(sizes), assignment.n, dtype=np.int64)
    np.minimum.at(first, assignment.labels, assignment.nodes)
    order = sorted(range(len(sizes)), key=lambda c: (-sizes[c], first[c]))
    return [np.sort(assignment.members(c)) for c in order[:k]]


def label_pair_community(assignment: CommunityAssignment, u: int, v: int) -> str:
    return "intra" if assignment.community_of(u) == assignment.community_of(v) else "cross"


def intra_rate(assignment: CommunityAssignment, pairs) -> float:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        raise ValueError("no pairs")
    labels = [label_pair_community(assignment, int(u), int(v)) for u, v in pairs]
    return labels.count("intra") / len(labels)


def write_assignment(assignment: CommunityAssignment, csv_path: str | Path, json_path: str | Path | None = None,
                     index=None, extra: dict | None = None, header_lines=()) -> None:
    name = (lambda i: index.id_of(int(i))) if index is not None else str
    with Path(csv_path).open("w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "community_id"])
        for u, c in zip(assignment.nodes, assignment.labels):
            w.writerow([name(u), int(c)])
    if json_path is not None:
        summary = {
            "modularity": assignment.modularity,
            "num_communities": assignment.num_communities,
            "sizes": assignment.sizes.tolist(),
            "history": assignment.history,
            "resolution": assignment.resolution,
        }
        summary.update(extra or {})
        Path(json_path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_assignment(path: str | Path, index, n: int) -> CommunityAssignment:
    nodes, labels = [], []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(line for line in fh if not line.startswith("#")):
            nodes.append(index[row["node_id"]])
            labels.append(int(row["community_id"]))
    return CommunityAssignment(n, np.array(nodes, dtype=np.int64), np.array(labels, dtype=np.int64), float("nan"))
