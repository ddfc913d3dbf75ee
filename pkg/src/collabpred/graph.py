"""Temporal co-authorship edges, author profiles and windowed graph snapshots.

Edges arrive as a CSV edge list (``src,dst,year[,weight]``) and are mapped onto
dense integer author indices in first-seen order.  A :class:`GraphSnapshot`
aggregates every edge inside a year window into an immutable CSR adjacency.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as ssp

from .artifacts import save_npz

logger = logging.getLogger(__name__)

Window = tuple[int, int]


class IngestError(ValueError):
    """Malformed input row; the message carries the 1-based line number."""


class DuplicateProfileWarning(UserWarning):
    pass


class AuthorIndex:
    """Bijection between opaque author ids and contiguous dense indices."""

    def __init__(self, ids: Iterable[str] = ()):
        self._ids: list[str] = []
        self._pos: dict[str, int] = {}
        for sid in ids:
            self.add(sid)

    def add(self, sid: str) -> int:
        idx = self._pos.get(sid)
        if idx is None:
            idx = len(self._ids)
            self._pos[sid] = idx
            self._ids.append(sid)
        return idx

    def __getitem__(self, sid: str) -> int:
        return self._pos[sid]

    def get(self, sid: str, default=None):
        return self._pos.get(sid, default)

    def id_of(self, idx: int) -> str:
        return self._ids[idx]

    def __contains__(self, sid) -> bool:
        return sid in self._pos

    def __len__(self) -> int:
        return len(self._ids)

    def __eq__(self, other) -> bool:
        return isinstance(other, AuthorIndex) and self._ids == other._ids

    @property
    def ids(self) -> list[str]:
        return list(self._ids)


@dataclass
class EdgeTable:
    """Canonical temporal edges: ``u < v`` per row, unique ``(u, v, year)``."""

    u: np.ndarray
    v: np.ndarray
    year: np.ndarray
    weight: np.ndarray
    index: AuthorIndex
    accepted_rows: int = 0
    self_loops: int = 0
    out_of_range: int = 0

    def __len__(self) -> int:
        return len(self.u)

    @property
    def years(self) -> tuple[int, int] | None:
        if len(self.year) == 0:
            return None
        return int(self.year.min()), int(self.year.max())


def _canonical_edges(u, v, year, weight) -> tuple[np.ndarray, ...]:
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    year = np.asarray(year, dtype=np.int64)
    weight = np.asarray(weight, dtype=np.int64)
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    if len(lo) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), empty.copy(), empty.copy()
    order = np.lexsort((year, hi, lo))
    lo, hi, year, weight = lo[order], hi[order], year[order], weight[order]
    new_group = np.ones(len(lo), dtype=bool)
    new_group[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1]) | (year[1:] != year[:-1])
    starts = np.flatnonzero(new_group)
    summed = np.add.reduceat(weight, starts)
    return lo[starts], hi[starts], year[starts], summed


def edges_from_records(records: Iterable[tuple[str, str, int, int]], index: AuthorIndex | None = None) -> EdgeTable:
    """Build an :class:`EdgeTable` from in-memory ``(src, dst, year, weight)`` rows."""
    index = AuthorIndex() if index is None else index
    us, vs, ys, ws = [], [], [], []
    loops = 0
    for src, dst, year, weight in records:
        if src == dst:
            loops += 1
            continue
        us.append(index.add(src))
        vs.append(index.add(dst))
        ys.append(int(year))
        ws.append(int(weight))
    u, v, y, w = _canonical_edges(us, vs, ys, ws)
    return EdgeTable(u, v, y, w, index, accepted_rows=len(us), self_loops=loops)


def ingest_edges(path: str | Path, year_range: Window | None = None) -> EdgeTable:
    """Read a ``src,dst,year[,weight]`` CSV edge list.

    Duplicate ``(u, v, year)`` rows (in either orientation) sum their weights.
    Self-loops are counted and skipped; rows outside ``year_range`` are dropped
    before any author index is assigned.
    """
    path = Path(path)
    index = AuthorIndex()
    us, vs, ys, ws = [], [], [], []
    loops = dropped = 0
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = None
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()) or row[0].startswith("#"):
                continue
            if header is None:
                header = [c.strip() for c in row]
                if header[:3] != ["src", "dst", "year"] or header[3:] not in ([], ["weight"]):
                    raise IngestError(f"line {lineno}: expected header src,dst,year[,weight], got {row}")
                continue
            if len(row) not in (3, 4) or (len(row) == 4 and len(header) == 3):
                raise IngestError(f"line {lineno}: expected {len(header)} columns, got {len(row)}")
            src, dst = row[0].strip(), row[1].strip()
            if not src or not dst:
                raise IngestError(f"line {lineno}: empty author id")
            try:
                year = int(row[2])
                weight = int(row[3]) if len(row) == 4 and row[3].strip() else 1
            except ValueError as exc:
                raise IngestError(f"line {lineno}: {exc}") from None
            if weight < 1:
                raise IngestError(f"line {lineno}: weight must be >= 1, got {weight}")
            if src == dst:
                loops += 1
                continue
            if year_range is not None and not (year_range[0] <= year <= year_range[1]):
                dropped += 1
                continue
            us.append(index.add(src))
            vs.append(index.add(dst))
            ys.append(year)
            ws.append(weight)
    u, v, y, w = _canonical_edges(us, vs, ys, ws)
    if loops:
        logger.warning("%s: rejected %d self-loop rows", path, loops)
    return EdgeTable(u, v, y, w, index, accepted_rows=len(us), self_loops=loops, out_of_range=dropped)


def write_edges(edges: EdgeTable, path: str | Path, header_lines: Sequence[str] = ()) -> None:
    """Write the edge table so that :func:`ingest_edges` rebuilds the same index.

    Rows are grouped by the later-introduced endpoint; an author that was first
    seen together with its successor is emitted in a leading ``(k, k+1)`` row.
    """
    lo, hi = edges.u, edges.v
    n = len(edges.index)
    min_nbr = np.full(n, n, dtype=np.int64)
    np.minimum.at(min_nbr, hi, lo)
    orphan_row = (min_nbr[lo] > lo) & (hi == lo + 1)
    key_min = np.where(orphan_row, -1, lo)
    order = np.lexsort((edges.year, key_min, hi))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst", "year", "weight"])
        ids = edges.index.ids
        for i in order:
            w.writerow([ids[lo[i]], ids[hi[i]], int(edges.year[i]), int(edges.weight[i])])


@dataclass(frozen=True)
class AuthorProfile:
    id: str
    display_name: str = ""
    institution: str = ""
    country_code: str = ""
    continent: str = ""
    works_count: int = 0
    cited_by_count: int = 0
    concepts: tuple[str, ...] = ()
    ethnicity: str | None = None
    # optional per-year {year: (works, cited_by)} and (institution, first_year, last_year)
    counts_by_year: dict = field(default_factory=dict, compare=False, hash=False)
    affiliations: tuple = ()

    def __post_init__(self):
        if self.works_count < 0 or self.cited_by_count < 0:
            raise ValueError(f"profile {self.id}: negative count")

    def to_json(self) -> dict:
        out = {
            "id": self.id,
            "display_name": self.display_name,
            "institution": self.institution,
            "country_code": self.country_code,
            "continent": self.continent,
            "works_count": self.works_count,
            "cited_by_count": self.cited_by_count,
            "concepts": list(self.concepts),
        }
        if self.ethnicity is not None:
            out["ethnicity"] = self.ethnicity
        if self.counts_by_year:
            out["counts_by_year"] = [
                {"year": y, "works_count": w, "cited_by_count": c}
                for y, (w, c) in sorted(self.counts_by_year.items())
            ]
        if self.affiliations:
            out["affiliations"] = [
                {"institution": name, "years": [y0, y1]} for name, y0, y1 in self.affiliations
            ]
        return out


def _dedupe(items: Iterable[str]) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for it in items:
        it = str(it)
        if it not in seen:
            seen[it] = None
    return tuple(seen)


def profile_from_json(obj: dict) -> AuthorProfile:
    if "id" not in obj or obj["id"] in (None, ""):
        raise KeyError("id")
    counts = {}
    for rec in obj.get("counts_by_year") or []:
        counts[int(rec["year"])] = (int(rec.get("works_count", 0)), int(rec.get("cited_by_count", 0)))
    affs = []
    for rec in obj.get("affiliations") or []:
        years = rec.get("years") or []
        if years:
            affs.append((str(rec.get("institution", "")), int(min(years)), int(max(years))))
    eth = obj.get("ethnicity")
    return AuthorProfile(
        id=str(obj["id"]),
        display_name=str(obj.get("display_name") or ""),
        institution=str(obj.get("institution") or ""),
        country_code=str(obj.get("country_code") or "").upper(),
        continent=str(obj.get("continent") or ""),
        works_count=int(obj.get("works_count") or 0),
        cited_by_count=int(obj.get("cited_by_count") or 0),
        concepts=_dedupe(obj.get("concepts") or ()),
        ethnicity=str(eth) if eth not in (None, "") else None,
        counts_by_year=counts,
        affiliations=tuple(affs),
    )


def ingest_profiles(path: str | Path) -> dict[str, AuthorProfile]:
    """Load a JSON-Lines profile file keyed by author id (last record wins)."""
    profiles: dict[str, AuthorProfile] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                prof = profile_from_json(obj)
            except KeyError as exc:
                raise IngestError(f"line {lineno}: missing field {exc}") from None
            except (ValueError, TypeError) as exc:
                raise IngestError(f"line {lineno}: {exc}") from None
            if prof.id in profiles:
                warnings.warn(f"line {lineno}: duplicate profile id {prof.id!r}, keeping last",
                              DuplicateProfileWarning, stacklevel=2)
            profiles[prof.id] = prof
    return profiles


def write_profiles(profiles: Iterable[AuthorProfile], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for p in profiles:
            fh.write(json.dumps(p.to_json(), sort_keys=True) + "\n")


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class GraphSnapshot:
    """Immutable undirected graph over the dense index space ``0..n-1``.

    ``n`` is the size of the author universe; only authors with at least one
    edge in the window count towards :attr:`node_count`.
    """

    def __init__(self, n: int, indptr, indices, weights, window: Window | None = None,
                 index: AuthorIndex | None = None):
        self.n = int(n)
        self.indptr = _readonly(np.asarray(indptr, dtype=np.int64))
        self.indices = _readonly(np.asarray(indices, dtype=np.int64))
        self.weights = _readonly(np.asarray(weights, dtype=np.int64))
        self.window = window
        self.index = index
        self.degree = _readonly(np.diff(self.indptr))
        self.nodes = _readonly(np.flatnonzero(self.degree > 0))
        self.node_count = len(self.nodes)
        self.edge_count = len(self.indices) // 2
        self._csr = None

    @classmethod
    def from_pairs(cls, n: int, u, v, w=None, window=None, index=None) -> "GraphSnapshot":
        """Aggregate undirected pairs (any orientation, repeats summed)."""
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        w = np.ones(len(u), dtype=np.int64) if w is None else np.asarray(w, dtype=np.int64)
        if np.any(u == v):
            raise ValueError("self-loops are not allowed")
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        if len(lo):
            key = lo * n + hi
            uniq, inv = np.unique(key, return_inverse=True)
            wsum = np.bincount(inv, weights=w).astype(np.int64)
            lo, hi = uniq // n, uniq % n
        else:
            wsum = np.zeros(0, dtype=np.int64)
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        ww = np.concatenate([wsum, wsum])
        order = np.lexsort((dst, src))
        src, dst, ww = src[order], dst[order], ww[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return cls(n, indptr, dst, ww, window=window, index=index)

    def check_node(self, u: int) -> None:
        if not (0 <= int(u) < self.n):
            raise KeyError(f"unknown node {u}")

    def neighbors(self, u: int) -> np.ndarray:
        self.check_node(u)
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def neighbor_weights(self, u: int) -> np.ndarray:
        return self.weights[self.indptr[u]:self.indptr[u + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        self.check_node(v)
        i = np.searchsorted(nb, v)
        return bool(i < len(nb) and nb[i] == v)

    def edge_weight(self, u: int, v: int) -> int:
        nb = self.neighbors(u)
        self.check_node(v)
        i = np.searchsorted(nb, v)
        if i < len(nb) and nb[i] == v:
            return int(self.weights[self.indptr[u] + i])
        raise KeyError(f"({u}, {v}) is not an edge")

    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Undirected edges as ``(u, v, weight)`` arrays with ``u < v``."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.degree)
        keep = src < self.indices
        return src[keep], self.indices[keep], self.weights[keep]

    def edge_keys(self) -> np.ndarray:
        u, v, _ = self.edges()
        return u * self.n + v

    def csr(self, weighted: bool = False) -> ssp.csr_matrix:
        """Binary (or weighted) adjacency as a scipy CSR matrix."""
        if weighted:
            return ssp.csr_matrix((self.weights.astype(np.float64), self.indices, self.indptr),
                                  shape=(self.n, self.n))
        if self._csr is None:
            self._csr = ssp.csr_matrix((np.ones(len(self.indices)), self.indices, self.indptr),
                                       shape=(self.n, self.n))
        return self._csr

    def subgraph(self, nodes) -> "GraphSnapshot":
        """Induced subgraph on ``nodes``; the index space is unchanged."""
        mask = np.zeros(self.n, dtype=bool)
        mask[np.asarray(nodes, dtype=np.int64)] = True
        u, v, w = self.edges()
        keep = mask[u] & mask[v]
        return GraphSnapshot.from_pairs(self.n, u[keep], v[keep], w[keep], window=self.window, index=self.index)

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        for a in (np.array([self.n], dtype=np.int64), self.indptr, self.indices, self.weights):
            buf.write(np.ascontiguousarray(a, dtype="<i8").tobytes())
        return buf.getvalue()

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def __eq__(self, other) -> bool:
        return isinstance(other, GraphSnapshot) and self.to_bytes() == other.to_bytes()

    def __repr__(self) -> str:
        return (f"GraphSnapshot(window={self.window}, nodes={self.node_count}, "
                f"edges={self.edge_count})")


def _normalize_windows(window) -> list[Window]:
    if window is None:
        return []
    if len(window) == 2 and all(isinstance(x, (int, np.integer)) for x in window):
        windows = [(int(window[0]), int(window[1]))]
    else:
        windows = [(int(a), int(b)) for a, b in window]
    for a, b in windows:
        if a > b:
            raise ValueError(f"empty window {a}-{b}")
    return windows


def build_snapshot(edges: EdgeTable, window: Window | Sequence[Window]) -> GraphSnapshot:
    """Aggregate all edges whose year falls inside ``window``.

    ``window`` is one inclusive ``(y0, y1)`` range or a list of them; edges of
    the same pair in several years (or windows) sum their weights.
    """
    windows = _normalize_windows(window)
    if not windows:
        raise ValueError("window must be non-empty")
    mask = np.zeros(len(edges), dtype=bool)
    for a, b in windows:
        mask |= (edges.year >= a) & (edges.year <= b)
    span = (min(a for a, _ in windows), max(b for _, b in windows))
    return GraphSnapshot.from_pairs(len(edges.index), edges.u[mask], edges.v[mask], edges.weight[mask],
                                    window=span, index=edges.index)


def save_snapshot(g: GraphSnapshot, path: str | Path, fmt: str = "npz", prov=None) -> None:
    """Dump a snapshot as a binary ``.npz`` archive or a ``src,dst,weight`` CSV."""
    path = Path(path)
    if fmt == "npz":
        ids = np.array(g.index.ids if g.index is not None else [], dtype=str)
        window = np.array(g.window if g.window is not None else (0, -1), dtype=np.int64)
        save_npz(path, prov, n=np.array([g.n]), indptr=g.indptr, indices=g.indices, weights=g.weights,
                 window=window, ids=ids)
    elif fmt == "csv":
        u, v, w = g.edges()
        name = (lambda i: g.index.id_of(int(i))) if g.index is not None else str
        with path.open("w", newline="", encoding="utf-8") as fh:
            if prov is not None:
                fh.write("# " + " ".join(f"{k}={prov[k]}" for k in sorted(prov)) + "\n")
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["src", "dst", "weight"])
            for a, b, c in zip(u, v, w):
                out.writerow([name(a), name(b), int(c)])
    else:
        raise ValueError(f"unknown snapshot format {fmt!r}")


def load_snapshot(path: str | Path) -> GraphSnapshot:
    with np.load(Path(path), allow_pickle=False) as z:
        ids = [str(s) for s in z["ids"]]
        window = tuple(int(x) for x in z["window"])
        return GraphSnapshot(int(z["n"][0]), z["indptr"].copy(), z["indices"].copy(), z["weights"].copy(),
                             window=None if window == (0, -1) else window,
                             index=AuthorIndex(ids) if ids else None)
