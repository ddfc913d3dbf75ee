"""Era windows, per-window growth statistics and edge classification."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .graph import EdgeTable, GraphSnapshot, Window


@dataclass(frozen=True)
class EraConfig:
    name: str
    train_windows: tuple[Window, ...]
    eval_window: Window

    def __post_init__(self):
        wins = sorted(self.train_windows)
        if not wins:
            raise ValueError(f"era {self.name}: no training window")
        for a, b in list(wins) + [self.eval_window]:
            if a > b:
                raise ValueError(f"era {self.name}: empty window {a}-{b}")
        for (a0, b0), (a1, b1) in zip(wins, wins[1:]):
            if a1 <= b0:
                raise ValueError(f"era {self.name}: overlapping train windows")
        if self.eval_window[0] <= wins[-1][1]:
            raise ValueError(f"era {self.name}: eval window must start after the last train window")

    @property
    def train_span(self) -> Window:
        return self.train_windows[0][0], self.train_windows[-1][1]

    @classmethod
    def from_json(cls, obj: dict) -> "EraConfig":
        train = tuple(sorted((int(a), int(b)) for a, b in obj["train"]))
        ev = obj["eval"]
        return cls(str(obj["name"]), train, (int(ev[0]), int(ev[1])))

    def to_json(self) -> dict:
        return {"name": self.name, "train": [list(w) for w in self.train_windows],
                "eval": list(self.eval_window)}


# Default three-era split over two-year windows (2004-09, 2010-17, 2018-23).
DEFAULT_ERAS = (
    EraConfig("era1", ((2004, 2005), (2006, 2007)), (2008, 2009)),
    EraConfig("era2", ((2010, 2011), (2012, 2013), (2014, 2015)), (2016, 2017)),
    EraConfig("era3", ((2018, 2019), (2020, 2021)), (2022, 2023)),
)


class EdgeClass(enum.Enum):
    CONTINUED = "continued"
    NEW = "new"
    DROPPED = "dropped"


@dataclass
class EdgeClassification:
    """Pair keys (``u * n + v`` with ``u < v``) grouped by class."""

    n: int
    continued: np.ndarray
    new: np.ndarray
    dropped: np.ndarray

    @property
    def counts(self) -> dict[str, int]:
        return {"continued": len(self.continued), "new": len(self.new), "dropped": len(self.dropped)}

    def pairs(self, cls: EdgeClass) -> np.ndarray:
        keys = {EdgeClass.CONTINUED: self.continued, EdgeClass.NEW: self.new,
                EdgeClass.DROPPED: self.dropped}[cls]
        return np.stack([keys // self.n, keys % self.n], axis=1) if len(keys) else np.zeros((0, 2), np.int64)

    def as_dict(self) -> dict[tuple[int, int], EdgeClass]:
        out = {}
        for cls in EdgeClass:
            for u, v in self.pairs(cls):
                out[(int(u), int(v))] = cls
        return out


def classify_edges(train: GraphSnapshot, eval: GraphSnapshot) -> EdgeClassification:
    """Split the edges of ``train`` and ``eval`` into continued / new / dropped."""
    if train.n != eval.n:
        raise ValueError("snapshots must share one id space")
    tk = train.edge_keys()
    ek = eval.edge_keys()
    return EdgeClassification(
        n=train.n,
        continued=np.intersect1d(tk, ek, assume_unique=True),
        new=np.setdiff1d(ek, tk, assume_unique=True),
        dropped=np.setdiff1d(tk, ek, assume_unique=True),
    )


def write_classification(cls: EdgeClassification, path: str | Path, index=None,
                         header_lines: Sequence[str] = ()) -> None:
    name = (lambda i: index.id_of(int(i))) if index is not None else str
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v", "class"])
        for c in EdgeClass:
            for u, v in cls.pairs(c):
                w.writerow([name(u), name(v), c.value])


@dataclass(frozen=True)
class WindowStats:
    window: Window
    authors: int
    edges: int
    avg_degree: float
    edges_per_author: float
    edge_growth: float | None = None
    author_growth: float | None = None

    def row(self) -> list:
        fmt = lambda x: "" if x is None else f"{x:.4f}"
        return [f"{self.window[0]}-{self.window[1]}", self.authors, self.edges, f"{self.avg_degree:.4f}",
                fmt(self.edge_growth), f"{self.edges_per_author:.4f}", fmt(self.author_growth)]


def _growth(cur: int, prev: int | None) -> float | None:
    if not prev or not cur:
        return None
    return cur / prev


def stats_from_counts(windows: Sequence[Window], authors: Sequence[int], edges: Sequence[int]) -> list[WindowStats]:
    """Window statistics from precomputed author / edge counts."""
    out = []
    prev_a = prev_e = None
    for win, a, e in zip(windows, authors, edges):
        a, e = int(a), int(e)
        out.append(WindowStats(
            window=(int(win[0]), int(win[1])), authors=a, edges=e,
            avg_degree=2.0 * e / a if a else 0.0,
            edges_per_author=e / a if a else 0.0,
            edge_growth=_growth(e, prev_e),
            author_growth=_growth(a, prev_a),
        ))
        prev_a, prev_e = a, e
    return out


def window_stats(edges: EdgeTable, windows: Sequence[Window]) -> list[WindowStats]:
    """Per-window author/edge counts and growth against the previous window."""
    windows = [(int(a), int(b)) for a, b in windows]
    for (a0, b0), (a1, b1) in zip(windows, windows[1:]):
        if a1 <= b0:
            raise ValueError("windows must be ordered and non-overlapping")
    authors, counts = [], []
    n = len(edges.index)
    for a, b in windows:
        mask = (edges.year >= a) & (edges.year <= b)
        keys = np.unique(edges.u[mask] * max(n, 1) + edges.v[mask])
        counts.append(len(keys))
        authors.append(len(np.union1d(edges.u[mask], edges.v[mask])))
    return stats_from_counts(windows, authors, counts)


@dataclass(frozen=True)
class Boundary:
    """Era boundary between ``stats[position - 1]`` and ``stats[position]``."""

    position: int
    kind: str  # "spike" | "deceleration"
    after: Window
    before: Window
    edge_growth: float
    author_growth: float | None


def detect_boundaries(stats: Sequence[WindowStats], spike: float = 2.0, decel: float = 1.0) -> list[Boundary]:
    """Flag edge-growth spikes and decelerations that fall below author growth."""
    if len(stats) < 2:
        raise ValueError("need at least two windows")
    out = []
    for i in range(1, len(stats)):
        s = stats[i]
        g = s.edge_growth
        if g is None:
            continue
        if g >= spike:
            kind = "spike"
        elif g <= decel and s.author_growth is not None and s.author_growth > g:
            kind = "deceleration"
        else:
            continue
        out.append(Boundary(i, kind, stats[i - 1].window, s.window, g, s.author_growth))
    return out


STATS_HEADER = ["window", "authors", "edges", "avg_degree", "edge_growth", "edges_per_author", "author_growth"]


def write_stats(stats: Sequence[WindowStats], path: str | Path, header_lines: Sequence[str] = ()) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATS_HEADER)
        for s in stats:
            w.writerow(s.row())
