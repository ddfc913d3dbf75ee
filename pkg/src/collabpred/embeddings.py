"""node2vec: second-order random walks and skip-gram with negative sampling.

The walk and training inner loops are numba kernels.  Training in the default
single-worker mode is deterministic for a fixed seed; ``workers > 1`` switches
to lock-free parallel updates over walks.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numba
import numpy as np

from .graph import GraphSnapshot

OPERATORS = ("cosine", "hadamard_dot", "neg_l1", "neg_l2")
# (p, q) settings for the sensitivity sweep
PQ_SWEEP = ((1.0, 1.0), (0.25, 1.0), (4.0, 1.0), (1.0, 0.25), (1.0, 4.0))
MAGIC = b"N2VEMB01"
_WALK_BLOCK = 8192


@dataclass(frozen=True)
class EmbeddingConfig:
    dimension: int = 128
    walk_length: int = 80
    walks_per_node: int = 10
    p: float = 1.0
    q: float = 1.0
    window: int = 10
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.walk_length < 2:
            raise ValueError("walk_length must be >= 2")
        if self.p <= 0 or self.q <= 0:
            raise ValueError("p and q must be positive")
        if self.window < 1 or self.negatives < 0 or self.epochs < 0 or self.walks_per_node < 1:
            raise ValueError("invalid walk/training parameters")

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_json(cls, obj: dict | None) -> "EmbeddingConfig":
        return cls(**(obj or {}))


@dataclass
class WalkCorpus:
    """Walks as a ``-1``-padded matrix plus per-walk lengths."""

    walks: np.ndarray
    lengths: np.ndarray

    def __len__(self) -> int:
        return len(self.lengths)

    def __iter__(self):
        for row, n in zip(self.walks, self.lengths):
            yield row[:n].tolist()

    @property
    def num_tokens(self) -> int:
        return int(self.lengths.sum())


@numba.njit(cache=True)
def _walk_kernel(indptr, indices, starts, rand, inv_p, inv_q, uniform, out, lengths):
    walk_length = out.shape[1]
    for w in range(len(starts)):
        cur = starts[w]
        out[w, 0] = cur
        n = 1
        for step in range(1, walk_length):
            lo = indptr[cur]
            hi = indptr[cur + 1]
            d = hi - lo
            if d == 0:
                break
            r = rand[w, step]
            if uniform or n == 1:
                k = int(r * d)
                if k >= d:
                    k = d - 1
                nxt = indices[lo + k]
            else:
                prev = out[w, n - 2]
                plo = indptr[prev]
                phi = indptr[prev + 1]
                total = 0.0
                for i in range(lo, hi):
                    x = indices[i]
                    if x == prev:
                        total += inv_p
                    else:
                        j = plo + np.searchsorted(indices[plo:phi], x)
                        if j < phi and indices[j] == x:
                            total += 1.0
                        else:
                            total += inv_q
                target = r * total
                acc = 0.0
                nxt = indices[hi - 1]
                for i in range(lo, hi):
                    x = indices[i]
                    if x == prev:
                        acc += inv_p
                    else:
                        j = plo + np.searchsorted(indices[plo:phi], x)
                        if j < phi and indices[j] == x:
                            acc += 1.0
                        else:
                            acc += inv_q
                    if target < acc:
                        nxt = x
                        break
            out[w, n] = nxt
            n += 1
            cur = nxt
        lengths[w] = n


def transition_weights(g: GraphSnapshot, prev: int, cur: int, p: float, q: float) -> np.ndarray:
    """Unnormalised second-order weights over ``cur``'s neighbours, given ``prev``."""
    nb = g.neighbors(cur)
    prev_nb = g.neighbors(prev)
    w = np.where(np.isin(nb, prev_nb), 1.0, 1.0 / q)
    w[nb == prev] = 1.0 / p
    return w


def generate_walks(g: GraphSnapshot, cfg: EmbeddingConfig, nodes=None) -> WalkCorpus:
    """``walks_per_node`` biased walks from every node (degree > 0 by default)."""
    starts_all = g.nodes if nodes is None else np.asarray(nodes, dtype=np.int64)
    if len(starts_all) == 0:
        raise ValueError("graph has no nodes to walk from")
    rng = np.random.default_rng(cfg.seed)
    starts = np.concatenate([rng.permutation(starts_all) for _ in range(cfg.walks_per_node)])
    walks = np.full((len(starts), cfg.walk_length), -1, dtype=np.int64)
    lengths = np.zeros(len(starts), dtype=np.int64)
    uniform = cfg.p == 1.0 and cfg.q == 1.0
    for s in range(0, len(starts), _WALK_BLOCK):
        block = starts[s:s + _WALK_BLOCK]
        rand = rng.random((len(block), cfg.walk_length))
        _walk_kernel(g.indptr, g.indices, block, rand, 1.0 / cfg.p, 1.0 / cfg.q, uniform,
                     walks[s:s + _WALK_BLOCK], lengths[s:s + _WALK_BLOCK])
    return WalkCorpus(walks, lengths)


# --- skip-gram with negative sampling -------------------------------------

def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def sgns_loss_and_grad(h: np.ndarray, ctx: np.ndarray, negs: np.ndarray):
    """Negative-sampling loss for one (centre, context, negatives) triple.

    ``loss = -log s(h.c) - sum_k log s(-h.n_k)``.  Returns the loss and its
    gradients with respect to ``h``, ``ctx`` and each row of ``negs``.
    """
    negs = np.atleast_2d(negs)
    sp = _sigmoid(h @ ctx)
    sn = _sigmoid(negs @ h)
    loss = -np.log(sp) - np.sum(np.log(1.0 - sn))
    g_h = -(1.0 - sp) * ctx + sn @ negs
    g_ctx = -(1.0 - sp) * h
    g_negs = sn[:, None] * h[None, :]
    return float(loss), g_h, g_ctx, g_negs


@numba.njit(cache=True)
def _sgns_update(w_in, w_out, center, ctx, negs, lr, neu1e):
    d = w_in.shape[1]
    for i in range(d):
        neu1e[i] = 0.0
    for k in range(-1, len(negs)):
        if k < 0:
            t = ctx
            label = 1.0
        else:
            t = negs[k]
            label = 0.0
            if t < 0:
                continue
        f = 0.0
        for i in range(d):
            f += w_in[center, i] * w_out[t, i]
        g = (label - 1.0 / (1.0 + np.exp(-f))) * lr
        for i in range(d):
            neu1e[i] += g * w_out[t, i]
            w_out[t, i] += g * w_in[center, i]
    for i in range(d):
        w_in[center, i] += neu1e[i]


def sgns_step(w_in: np.ndarray, w_out: np.ndarray, center: int, ctx: int, negs, lr: float) -> None:
    """One in-place SGD step, exactly as applied inside the training loop."""
    _sgns_update(w_in, w_out, center, ctx, np.asarray(negs, dtype=np.int64), lr, np.zeros(w_in.shape[1]))


@numba.njit(cache=True)
def _draw_negatives(cum, ctx, negs):
    for k in range(len(negs)):
        t = np.searchsorted(cum, np.random.random(), side="right")
        if t >= len(cum):
            t = len(cum) - 1
        negs[k] = -1 if t == ctx else t


@numba.njit(cache=True)
def _train_serial(walks, lengths, w_in, w_out, cum, window, negatives, lr0, lr_min, epochs, seed):
    np.random.seed(seed)
    total = epochs * lengths.sum()
    done = 0
    neu1e = np.zeros(w_in.shape[1])
    negs = np.empty(negatives, dtype=np.int64)
    for _ in range(epochs):
        for w in range(walks.shape[0]):
            n = lengths[w]
            for i in range(n):
                lr = lr0 - (lr0 - lr_min) * done / max(total, 1)
                if lr < lr_min:
                    lr = lr_min
                c = walks[w, i]
                eff = window - np.random.randint(0, window)
                lo = max(0, i - eff)
                hi = min(n, i + eff + 1)
                for j in range(lo, hi):
                    if j == i:
                        continue
                    o = walks[w, j]
                    _draw_negatives(cum, o, negs)
                    _sgns_update(w_in, w_out, c, o, negs, lr, neu1e)
                done += 1


@numba.njit(cache=True, parallel=True)
def _train_hogwild(walks, lengths, w_in, w_out, cum, window, negatives, lr0, lr_min, epochs, seed):
    np.random.seed(seed)
    nw = walks.shape[0]
    for ep in range(epochs):
        for w in numba.prange(nw):
            neu1e = np.zeros(w_in.shape[1])
            negs = np.empty(negatives, dtype=np.int64)
            n = lengths[w]
            lr = lr0 - (lr0 - lr_min) * (ep * nw + w) / (epochs * nw)
            if lr < lr_min:
                lr = lr_min
            for i in range(n):
                c = walks[w, i]
                eff = window - np.random.randint(0, window)
                for j in range(max(0, i - eff), min(n, i + eff + 1)):
                    if j == i:
                        continue
                    o = walks[w, j]
                    _draw_negatives(cum, o, negs)
                    _sgns_update(w_in, w_out, c, o, negs, lr, neu1e)


@dataclass
class EmbeddingTable:
    nodes: np.ndarray
    vectors: np.ndarray
    config_digest: str = ""
    corpus_tokens: int = 0

    def __post_init__(self):
        self._pos = {int(u): i for i, u in enumerate(self.nodes)}

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, u) -> bool:
        return int(u) in self._pos

    def vector(self, u: int) -> np.ndarray:
        i = self._pos.get(int(u))
        if i is None:
            raise KeyError(f"node {u} not embedded")
        return self.vectors[i]

    def rows(self, nodes) -> np.ndarray:
        """Row index per node, ``-1`` for nodes without an embedding."""
        return np.array([self._pos.get(int(u), -1) for u in nodes], dtype=np.int64)

    def save(self, path: str | Path) -> None:
        """Binary table: magic, ``d`` (u32), ``n`` (u64), node ids (i64), vectors (f64, row-major)."""
        with Path(path).open("wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<IQ", self.dimension, len(self.nodes)))
            fh.write(np.ascontiguousarray(self.nodes, dtype="<i8").tobytes())
            fh.write(np.ascontiguousarray(self.vectors, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        data = Path(path).read_bytes()
        if data[:8] != MAGIC:
            raise ValueError(f"{path}: not an embedding table")
        d, n = struct.unpack_from("<IQ", data, 8)
        off = 8 + struct.calcsize("<IQ")
        nodes = np.frombuffer(data, dtype="<i8", count=n, offset=off).astype(np.int64)
        vecs = np.frombuffer(data, dtype="<f8", count=n * d, offset=off + 8 * n).reshape(n, d).copy()
        return cls(nodes, vecs)

    def save_csv(self, path: str | Path, index=None) -> None:
        name = (lambda i: index.id_of(int(i))) if index is not None else str
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node_id"] + [f"v{i}" for i in range(self.dimension)])
            for u, row in zip(self.nodes, self.vectors):
                w.writerow([name(u)] + [repr(float(x)) for x in row])


def init_vectors(n: int, d: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    w_in = rng.uniform(-0.5 / d, 0.5 / d, size=(n, d))
    return w_in, np.zeros((n, d))


def train_skipgram(corpus: WalkCorpus, cfg: EmbeddingConfig) -> EmbeddingTable:
    """Fit input/output vectors on the walk corpus and return the input vectors."""
    if len(corpus) == 0 or corpus.num_tokens == 0:
        raise ValueError("empty corpus")
    valid = corpus.walks[corpus.walks >= 0]
    vocab, counts = np.unique(valid, return_counts=True)
    remap = np.full(int(vocab.max()) + 1, -1, dtype=np.int64)
    remap[vocab] = np.arange(len(vocab))
    walks = np.where(corpus.walks >= 0, remap[np.maximum(corpus.walks, 0)], -1)
    freq = counts.astype(np.float64) ** 0.75
    cum = np.cumsum(freq / freq.sum())
    w_in, w_out = init_vectors(len(vocab), cfg.dimension, cfg.seed)
    if cfg.epochs > 0:
        kernel = _train_hogwild if cfg.workers > 1 else _train_serial
        kernel(walks, corpus.lengths, w_in, w_out, cum, cfg.window, cfg.negatives,
               cfg.learning_rate, cfg.min_learning_rate, cfg.epochs, cfg.seed)
    if not np.all(np.isfinite(w_in)):
        raise FloatingPointError("training diverged (non-finite vectors)")
    return EmbeddingTable(vocab, w_in, cfg.digest(), corpus.num_tokens)


def node2vec(g: GraphSnapshot, cfg: EmbeddingConfig) -> EmbeddingTable:
    return train_skipgram(generate_walks(g, cfg), cfg)


def _op(a: np.ndarray, b: np.ndarray, operator: str) -> np.ndarray:
    if operator == "cosine":
        na = np.linalg.norm(a, axis=-1)
        nb = np.linalg.norm(b, axis=-1)
        dot = np.sum(a * b, axis=-1)
        den = na * nb
        return np.divide(dot, den, out=np.zeros_like(dot, dtype=np.float64), where=den > 0)
    if operator == "hadamard_dot":
        return np.sum(a * b, axis=-1)
    if operator == "neg_l1":
        return -np.sum(np.abs(a - b), axis=-1)
    if operator == "neg_l2":
        return -np.sqrt(np.sum((a - b) ** 2, axis=-1))
    raise ValueError(f"unknown operator {operator!r}")


def score_pair_embedding(table: EmbeddingTable, u: int, v: int, operator: str = "cosine") -> float:
    """Similarity of two embedded nodes; distances are negated so higher means closer."""
    return float(_op(table.vector(u), table.vector(v), operator))


def score_pairs(table: EmbeddingTable, pairs, operator: str = "cosine") -> np.ndarray:
    """Vectorised :func:`score_pair_embedding`; ``nan`` where a node lacks a vector."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    ru, rv = table.rows(pairs[:, 0]), table.rows(pairs[:, 1])
    ok = (ru >= 0) & (rv >= 0)
    out = np.full(len(pairs), np.nan)
    if ok.any():
        out[ok] = _op(table.vectors[ru[ok]], table.vectors[rv[ok]], operator)
    return out
