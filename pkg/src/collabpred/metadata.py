"""Pair features derived from author profiles, homophily ratios and feature AUROC.

Missing data is never imputed: a feature is ``None`` (``nan`` in arrays) when
either profile is absent or lacks the underlying field, and such pairs are
dropped per feature when computing rates or AUROC.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .countries import continent_for
from .evaluation import auroc
from .graph import AuthorProfile

FEATURES = (
    "concept_overlap_count", "concept_jaccard", "cited_by_product", "works_product",
    "same_institution", "same_country", "same_continent", "same_ethnicity",
)
SAME_FEATURES = ("same_institution", "same_country", "same_continent", "same_ethnicity")


def _norm(s: str) -> str:
    return " ".join(s.split()).casefold()


def _concept_set(p: AuthorProfile) -> set[str]:
    return {_norm(c) for c in p.concepts if c.strip()}


def concept_overlap(a: AuthorProfile | None, b: AuthorProfile | None) -> int | None:
    """Number of shared concepts (case-insensitive, whitespace-trimmed)."""
    if a is None or b is None:
        return None
    return len(_concept_set(a) & _concept_set(b))


def concept_jaccard(a: AuthorProfile | None, b: AuthorProfile | None) -> float | None:
    if a is None or b is None:
        return None
    sa, sb = _concept_set(a), _concept_set(b)
    union = sa | sb
    return len(sa & sb) / len(union) if union else 0.0


def count_product(a: AuthorProfile | None, b: AuthorProfile | None, field: str) -> float | None:
    if field not in ("cited_by", "works"):
        raise ValueError(f"unknown count field {field!r}")
    if a is None or b is None:
        return None
    attr = f"{field}_count"
    return float(getattr(a, attr)) * float(getattr(b, attr))


def _same(x: str | None, y: str | None) -> int | None:
    if not x or not y:
        return None
    return int(x == y)


def _continent(p: AuthorProfile) -> str:
    return p.continent or continent_for(p.country_code)


@dataclass(frozen=True)
class PairFeatureVector:
    concept_overlap_count: int | None = None
    concept_jaccard: float | None = None
    cited_by_product: float | None = None
    works_product: float | None = None
    same_institution: int | None = None
    same_country: int | None = None
    same_continent: int | None = None
    same_ethnicity: int | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def sociocultural_features(a: AuthorProfile | None, b: AuthorProfile | None) -> PairFeatureVector:
    """The ``same_*`` indicators (exact equality; institutions compared after normalisation)."""
    if a is None or b is None:
        return PairFeatureVector()
    return PairFeatureVector(
        same_institution=_same(_norm(a.institution), _norm(b.institution)),
        same_country=_same(a.country_code.upper(), b.country_code.upper()),
        same_continent=_same(_continent(a), _continent(b)),
        same_ethnicity=_same(a.ethnicity, b.ethnicity),
    )


def pair_features(a: AuthorProfile | None, b: AuthorProfile | None) -> PairFeatureVector:
    soc = sociocultural_features(a, b)
    return PairFeatureVector(
        concept_overlap_count=concept_overlap(a, b),
        concept_jaccard=concept_jaccard(a, b),
        cited_by_product=count_product(a, b, "cited_by"),
        works_product=count_product(a, b, "works"),
        same_institution=soc.same_institution,
        same_country=soc.same_country,
        same_continent=soc.same_continent,
        same_ethnicity=soc.same_ethnicity,
    )


def feature_matrix(pairs, profiles: Mapping[int, AuthorProfile]) -> dict[str, np.ndarray]:
    """``{feature: values}`` for index pairs; ``nan`` marks missing values.

    ``profiles`` maps dense author indices to profiles.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    cols = {f: np.full(len(pairs), np.nan) for f in FEATURES}
    for i, (u, v) in enumerate(pairs):
        vec = pair_features(profiles.get(int(u)), profiles.get(int(v)))
        for f, x in vec.as_dict().items():
            if x is not None:
                cols[f][i] = x
    return cols


def missing_profile_count(pairs, profiles: Mapping[int, AuthorProfile]) -> int:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return int(sum(1 for u, v in pairs if int(u) not in profiles or int(v) not in profiles))


@dataclass(frozen=True)
class HomophilyResult:
    feature: str
    collab_rate: float | None
    noncollab_rate: float | None
    ratio: float | None
    positives: int
    negatives: int


def homophily_ratio(values, labels, feature: str = "") -> HomophilyResult:
    """Same-group rate among positives divided by the rate among negatives.

    ``values`` are 0/1 indicators with ``nan``/``None`` for missing.  The ratio
    is ``None`` when the negative rate is zero.
    """
    vals = np.array([np.nan if x is None else x for x in values], dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    ok = ~np.isnan(vals)
    pos = vals[ok & labels]
    neg = vals[ok & ~labels]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError(f"{feature or 'feature'}: need at least one positive and one negative with the feature")
    pr, nr = float(pos.mean()), float(neg.mean())
    return HomophilyResult(feature, pr, nr, pr / nr if nr > 0 else None, len(pos), len(neg))


def feature_auroc_table(features: Mapping[str, Sequence[float]], labels,
                        names: Sequence[str] | None = None) -> dict[str, float | None]:
    """AUROC per feature column, excluding pairs where that feature is missing."""
    labels = np.asarray(labels, dtype=bool)
    out: dict[str, float | None] = {}
    for name in names or list(features):
        vals = np.asarray(features[name], dtype=np.float64)
        ok = ~np.isnan(vals)
        y = labels[ok]
        out[name] = auroc(vals[ok], y) if y.any() and (~y).any() else None
    return out


def write_feature_matrix(pairs, cols: Mapping[str, np.ndarray], path: str | Path, index=None,
                         header_lines: Sequence[str] = ()) -> None:
    """One row per pair, one column per feature, ``NA`` for missing."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    name = (lambda i: index.id_of(int(i))) if index is not None else str
    feats = list(cols)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v"] + feats)
        for i, (u, v) in enumerate(pairs):
            row = [name(u), name(v)]
            for f in feats:
                x = cols[f][i]
                row.append("NA" if math.isnan(x) else (str(int(x)) if float(x).is_integer() else repr(float(x))))
            w.writerow(row)
