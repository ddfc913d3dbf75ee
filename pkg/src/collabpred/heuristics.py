"""Neighbourhood link-prediction heuristics on an unweighted training snapshot.

Per-pair functions intersect sorted neighbour arrays; :func:`score_batch`
computes the same quantities for many pairs at once through sparse row
products.  Adamic-Adar uses the natural logarithm.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as ssp

from .graph import GraphSnapshot

METHODS = ("CN", "JC", "AA", "RA", "PA")
ALL_METHODS = METHODS + ("EdgeWeight", "Random")


class HeuristicScore(NamedTuple):
    u: int
    v: int
    method: str
    value: float


def _common(g: GraphSnapshot, u: int, v: int) -> np.ndarray:
    return np.intersect1d(g.neighbors(u), g.neighbors(v), assume_unique=True)


def common_neighbors(g: GraphSnapshot, u: int, v: int) -> float:
    return float(len(_common(g, u, v)))


def jaccard(g: GraphSnapshot, u: int, v: int) -> float:
    cn = len(_common(g, u, v))
    union = g.degree[u] + g.degree[v] - cn
    return cn / union if union else 0.0


def adamic_adar(g: GraphSnapshot, u: int, v: int) -> float:
    # a common neighbour has degree >= 2, so log(deg) > 0
    return float(np.sum(1.0 / np.log(g.degree[_common(g, u, v)])))


def resource_allocation(g: GraphSnapshot, u: int, v: int) -> float:
    return float(np.sum(1.0 / g.degree[_common(g, u, v)]))


def preferential_attachment(g: GraphSnapshot, u: int, v: int) -> float:
    g.check_node(u)
    g.check_node(v)
    return float(g.degree[u] * g.degree[v])


def edge_weight_score(g: GraphSnapshot, u: int, v: int) -> float:
    """Aggregated training weight of an existing edge (persistence baseline)."""
    try:
        return float(g.edge_weight(u, v))
    except KeyError:
        if 0 <= u < g.n and 0 <= v < g.n:
            raise ValueError(f"({u}, {v}) is not a training edge; edge weight is undefined") from None
        raise


PAIR_FUNCS = {
    "CN": common_neighbors,
    "JC": jaccard,
    "AA": adamic_adar,
    "RA": resource_allocation,
    "PA": preferential_attachment,
    "EdgeWeight": edge_weight_score,
}


def _column_weights(g: GraphSnapshot, kind: str) -> np.ndarray:
    deg = g.degree.astype(np.float64)
    out = np.zeros(g.n)
    if kind == "AA":
        ok = deg > 1
        out[ok] = 1.0 / np.log(deg[ok])
    else:
        ok = deg > 0
        out[ok] = 1.0 / deg[ok]
    return out


def score_batch(g: GraphSnapshot, pairs, methods: Sequence[str] = METHODS, seed: int = 0,
                chunk: int = 1 << 16) -> dict[str, np.ndarray]:
    """Score every pair under every method; returns ``{method: scores}``.

    ``Random`` draws uniform ``[0, 1)`` values from ``default_rng(seed)``.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    unknown = set(methods) - set(ALL_METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    if len(pairs) and (pairs.min() < 0 or pairs.max() >= g.n):
        bad = pairs[(pairs < 0).any(1) | (pairs >= g.n).any(1)][0]
        raise KeyError(f"unknown node in pair {tuple(bad)}")
    u, v = pairs[:, 0], pairs[:, 1]
    deg = g.degree.astype(np.float64)
    A = g.csr()
    need_cn = {"CN", "JC"} & set(methods)
    out: dict[str, np.ndarray] = {}
    cn = aa = ra = None
    if need_cn:
        cn = np.empty(len(pairs))
    if "AA" in methods:
        aa = np.empty(len(pairs))
        A_aa = A @ ssp.diags(_column_weights(g, "AA"))
    if "RA" in methods:
        ra = np.empty(len(pairs))
        A_ra = A @ ssp.diags(_column_weights(g, "RA"))
    for s in range(0, len(pairs), chunk):
        cu, cv = u[s:s + chunk], v[s:s + chunk]
        Av = A[cv]
        if cn is not None:
            cn[s:s + chunk] = np.asarray(A[cu].multiply(Av).sum(axis=1)).ravel()
        if aa is not None:
            aa[s:s + chunk] = np.asarray(A_aa[cu].multiply(Av).sum(axis=1)).ravel()
        if ra is not None:
            ra[s:s + chunk] = np.asarray(A_ra[cu].multiply(Av).sum(axis=1)).ravel()
    for m in methods:
        if m == "CN":
            out[m] = cn
        elif m == "JC":
            union = deg[u] + deg[v] - cn
            out[m] = np.divide(cn, union, out=np.zeros(len(pairs)), where=union > 0)
        elif m == "AA":
            out[m] = aa
        elif m == "RA":
            out[m] = ra
        elif m == "PA":
            out[m] = deg[u] * deg[v]
        elif m == "EdgeWeight":
            w = np.asarray(g.csr(weighted=True)[u, v]).ravel() if len(pairs) else np.zeros(0)
            if np.any(w == 0):
                bad = pairs[w == 0][0]
                raise ValueError(f"{tuple(bad)} is not a training edge; edge weight is undefined")
            out[m] = w
        elif m == "Random":
            out[m] = np.random.default_rng(seed).random(len(pairs))
    return out


def iter_scores(pairs, table: dict[str, np.ndarray]):
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    for m, vals in table.items():
        for (a, b), x in zip(pairs, vals):
            yield HeuristicScore(int(a), int(b), m, float(x))


def write_scores(pairs, table: dict[str, np.ndarray], path: str | Path, index=None,
                 header_lines: Sequence[str] = ()) -> None:
    """Long-format ``u,v,method,score`` CSV."""
    name = (lambda i: index.id_of(int(i))) if index is not None else str
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v", "method", "score"])
        for s in iter_scores(pairs, table):
            w.writerow([name(s.u), name(s.v), s.method, repr(s.value)])
