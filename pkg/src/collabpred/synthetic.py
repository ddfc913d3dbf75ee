"""Seeded synthetic co-authorship data for tests and demos.

Authors arrive over time, belong to one latent community and have a limited
career.  Each year a number of papers is written; the lead author is drawn by
productivity and co-authors come from past collaborators, friends of friends
or the lead's community (preferential by productivity).  Profiles are
generated to be correlated with the community so metadata features carry some
signal.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .countries import continent_for
from .graph import AuthorProfile, EdgeTable, edges_from_records, write_edges, write_profiles

logger = logging.getLogger(__name__)

_VOCAB = (
    "Machine learning", "Computer vision", "Natural language processing", "Graph theory", "Optimization",
    "Statistics", "Bioinformatics", "Genomics", "Neuroscience", "Quantum computing", "Cryptography",
    "Databases", "Distributed computing", "Robotics", "Control theory", "Signal processing",
    "Information retrieval", "Human-computer interaction", "Computer networks", "Operating systems",
    "Programming languages", "Software engineering", "Computer security", "Data mining",
    "Reinforcement learning", "Speech recognition", "Computational biology", "Epidemiology",
    "Econometrics", "Game theory", "Social network analysis", "Scientometrics", "Materials science",
    "Condensed matter physics", "Astrophysics", "Climatology", "Remote sensing", "Medical imaging",
    "Pattern recognition", "Artificial intelligence", "Computer graphics", "Numerical analysis",
    "Combinatorics", "Algebra", "Topology", "Probability", "Linguistics", "Psychology",
)
_COUNTRIES = ("US", "CN", "GB", "DE", "FR", "JP", "IN", "CA", "AU", "BR", "KR", "IT", "ES", "NL", "ZA", "NG")
_ETHNICITY_OF = {
    "US": ("GreaterEuropean", "EastAsian", "Hispanic", "African"), "CN": ("EastAsian",),
    "GB": ("GreaterEuropean", "Asian"), "DE": ("GreaterEuropean",), "FR": ("GreaterEuropean", "African"),
    "JP": ("EastAsian",), "IN": ("Asian",), "CA": ("GreaterEuropean", "EastAsian"), "AU": ("GreaterEuropean",),
    "BR": ("Hispanic", "GreaterEuropean"), "KR": ("EastAsian",), "IT": ("GreaterEuropean",),
    "ES": ("Hispanic", "GreaterEuropean"), "NL": ("GreaterEuropean",), "ZA": ("African", "GreaterEuropean"),
    "NG": ("African",),
}
_FIRST = ("Wei", "Anna", "Luis", "Priya", "John", "Yuki", "Olga", "Ahmed", "Maria", "Chen", "Ada", "Kofi",
          "Ines", "Ravi", "Sara", "Tom", "Min", "Lena", "Omar", "Eva")
_LAST = ("Zhang", "Smith", "Garcia", "Patel", "Mueller", "Tanaka", "Ivanova", "Hassan", "Rossi", "Li",
         "Okafor", "Kim", "Dubois", "Silva", "Nguyen", "Brown", "Wang", "Kowalski", "Sato", "Mensah")


@dataclass(frozen=True)
class SynthConfig:
    authors: int = 2000
    first_year: int = 2004
    last_year: int = 2023
    communities: int = 6
    papers_per_active: float = 0.35
    late_boost_year: int = 2018       # paper output jumps from this year on
    late_boost: float = 1.8
    mean_career: float = 10.0
    p_repeat: float = 0.35
    p_closure: float = 0.3
    p_own_community: float = 0.85
    seed: int = 42

    @classmethod
    def from_json(cls, obj: dict | None) -> "SynthConfig":
        return cls(**(obj or {}))


def _weighted_pick(rng, items: np.ndarray, cum: np.ndarray) -> int:
    return int(items[min(np.searchsorted(cum, rng.random() * cum[-1], side="right"), len(items) - 1)])


def generate(cfg: SynthConfig = SynthConfig()) -> tuple[EdgeTable, list[AuthorProfile]]:
    rng = np.random.default_rng(cfg.seed)
    n = cfg.authors
    years = np.arange(cfg.first_year, cfg.last_year + 1)
    # arrivals skewed towards later years; a seed cohort exists from the start
    ramp = np.linspace(1.0, 3.0, len(years))
    arrival = rng.choice(years, size=n, p=ramp / ramp.sum())
    arrival[: max(1, n // 10)] = cfg.first_year
    career = 3 + rng.geometric(1.0 / max(cfg.mean_career - 3, 1.0), size=n)
    leave = arrival + career
    community = rng.integers(0, cfg.communities, size=n)
    productivity = rng.lognormal(0.0, 0.8, size=n)

    nbrs: list[set[int]] = [set() for _ in range(n)]
    papers_by_year = np.zeros((n, len(years)), dtype=np.int64)
    records: list[tuple[str, str, int, int]] = []
    ids = [f"A{100000 + i}" for i in range(n)]

    for yi, y in enumerate(years):
        active = np.flatnonzero((arrival <= y) & (leave >= y))
        if len(active) < 2:
            continue
        is_active = np.zeros(n, dtype=bool)
        is_active[active] = True
        cum_all = np.cumsum(productivity[active])
        by_comm = {}
        for c in range(cfg.communities):
            members = active[community[active] == c]
            if len(members):
                by_comm[c] = (members, np.cumsum(productivity[members]))
        rate = cfg.papers_per_active * (cfg.late_boost if y >= cfg.late_boost_year else 1.0)
        n_papers = rng.poisson(rate * len(active))
        for _ in range(n_papers):
            lead = _weighted_pick(rng, active, cum_all)
            size = 2 + min(rng.poisson(1.0), 4)
            team = [lead]
            for _ in range(size - 1):
                anchor = team[int(rng.integers(len(team)))]
                r = rng.random()
                pick = -1
                if r < cfg.p_repeat:
                    pool = [x for x in nbrs[anchor] if is_active[x]]
                    if pool:
                        pick = pool[int(rng.integers(len(pool)))]
                elif r < cfg.p_repeat + cfg.p_closure:
                    mids = [x for x in nbrs[anchor]]
                    if mids:
                        mid = mids[int(rng.integers(len(mids)))]
                        pool = [x for x in nbrs[mid] if is_active[x] and x != anchor]
                        if pool:
                            pick = pool[int(rng.integers(len(pool)))]
                if pick < 0:
                    c = community[anchor] if rng.random() < cfg.p_own_community else int(rng.integers(cfg.communities))
                    if c in by_comm:
                        pick = _weighted_pick(rng, *by_comm[c])
                    else:
                        pick = _weighted_pick(rng, active, cum_all)
                if pick not in team:
                    team.append(pick)
            for a in team:
                papers_by_year[a, yi] += 1
            team.sort()
            for i in range(len(team)):
                for j in range(i + 1, len(team)):
                    a, b = team[i], team[j]
                    nbrs[a].add(b)
                    nbrs[b].add(a)
                    records.append((ids[a], ids[b], int(y), 1))
    edges = edges_from_records(records)
    profiles = _profiles(cfg, rng, ids, community, arrival, leave, papers_by_year, years)
    logger.info("synthetic: %d authors, %d edge rows, years %s", len(edges.index), len(edges), edges.years)
    return edges, profiles


def _profiles(cfg, rng, ids, community, arrival, leave, papers_by_year, years) -> list[AuthorProfile]:
    k = cfg.communities
    vocab = np.array(_VOCAB)
    pools = [rng.choice(len(vocab), size=8, replace=False) for _ in range(k)]
    home = [_COUNTRIES[int(rng.integers(len(_COUNTRIES)))] for _ in range(k)]
    insts = [[f"University of {_LAST[int(rng.integers(len(_LAST)))]} {c}-{j}" for j in range(3)] for c in range(k)]
    out = []
    for i, sid in enumerate(ids):
        c = int(community[i])
        picks = list(rng.choice(pools[c], size=int(rng.integers(3, 6)), replace=False))
        extra = int(rng.integers(len(vocab)))
        if extra not in picks:
            picks.append(extra)
        country = home[c] if rng.random() < 0.6 else _COUNTRIES[int(rng.integers(len(_COUNTRIES)))]
        eth_opts = _ETHNICITY_OF[country]
        ethnicity = eth_opts[int(rng.integers(len(eth_opts)))] if rng.random() > 0.03 else None
        inst = insts[c][int(rng.integers(3))] if rng.random() > 0.05 else ""
        per_year = {}
        for yi, y in enumerate(years):
            w = int(papers_by_year[i, yi])
            if w:
                per_year[int(y)] = (w, int(rng.poisson(4 * w)))
        works = int(sum(w for w, _ in per_year.values()))
        cited = int(sum(c_ for _, c_ in per_year.values()))
        affs = ((inst, int(arrival[i]), int(min(leave[i], years[-1]))),) if inst else ()
        out.append(AuthorProfile(
            id=sid,
            display_name=f"{_FIRST[int(rng.integers(len(_FIRST)))]} {_LAST[int(rng.integers(len(_LAST)))]}",
            institution=inst,
            country_code=country,
            continent=continent_for(country),
            works_count=works,
            cited_by_count=cited,
            concepts=tuple(str(vocab[j]) for j in picks),
            ethnicity=ethnicity,
            counts_by_year=per_year,
            affiliations=affs,
        ))
    return out


def write_dataset(cfg: SynthConfig, out_dir: str | Path) -> tuple[Path, Path]:
    """Write ``edges.csv`` and ``profiles.jsonl`` under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    edges, profiles = generate(cfg)
    ep, pp = out / "edges.csv", out / "profiles.jsonl"
    write_edges(edges, ep)
    write_profiles(profiles, pp)
    return ep, pp
