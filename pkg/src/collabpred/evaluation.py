"""Sampling plans, ranking metrics, calibration, agreement analysis and reports."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .artifacts import header_lines

logger = logging.getLogger(__name__)

QUADRANTS = ("both_catch", "llm_only", "aa_only", "both_miss")


def auroc(scores, labels) -> float:
    """Mann-Whitney AUROC: P(score_pos > score_neg) with ties counted one half."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    if np.isnan(s).any():
        raise ValueError("scores contain nan")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("degenerate labels: need at least one positive and one negative")
    ranks = rankdata(s, method="average")
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class Rates:
    recall: float
    precision: float | None
    tpr: float
    fpr: float


def recall_precision(scores, labels, threshold: float) -> Rates:
    """Confusion-matrix rates for the rule ``score >= threshold``."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("degenerate labels: need at least one positive and one negative")
    pred = s >= threshold
    tp = int((pred & y).sum())
    fp = int((pred & ~y).sum())
    precision = tp / (tp + fp) if tp + fp else None
    return Rates(recall=tp / n_pos, precision=precision, tpr=tp / n_pos, fpr=fp / n_neg)


def spearman(x, y) -> float:
    """Pearson correlation of average ranks."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("length mismatch")
    if len(x) < 2:
        raise ValueError("need at least two observations")
    rx = rankdata(x) - (len(x) + 1) / 2.0
    ry = rankdata(y) - (len(y) + 1) / 2.0
    den = math.sqrt(float(rx @ rx) * float(ry @ ry))
    return float(rx @ ry) / den if den > 0 else float("nan")


def quantile_bins(scores, k: int = 10) -> np.ndarray:
    """Equal-count bin index (``0..k-1``) per score; tied scores go to the lower bin."""
    s = np.asarray(scores, dtype=np.float64)
    if len(s) == 0:
        return np.zeros(0, dtype=np.int64)
    srt = np.sort(s)
    n = len(s)
    cuts = np.array([srt[max(math.ceil(j * n / k) - 1, 0)] for j in range(1, k)])
    return np.searchsorted(cuts, s, side="left").astype(np.int64)


@dataclass(frozen=True)
class SamplePlan:
    mode: str = "natural"  # "natural" | "balanced"
    total: int = 5000
    strata: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("natural", "balanced"):
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        if self.total < 1 or self.strata < 1:
            raise ValueError("total and strata must be positive")

    @classmethod
    def natural(cls, total: int = 5000, seed: int = 0) -> "SamplePlan":
        return cls("natural", total, 10, seed)

    @classmethod
    def balanced(cls, total: int = 500, seed: int = 0) -> "SamplePlan":
        return cls("balanced", total, 5, seed)


@dataclass
class Sample:
    indices: np.ndarray
    strata: np.ndarray
    quotas: list[int]
    taken: list[int]
    shortfall_filled: int
    plan: SamplePlan
    notes: list[str] = field(default_factory=list)

    def metadata(self, labels=None) -> dict:
        meta = {"mode": self.plan.mode, "seed": self.plan.seed, "requested": self.plan.total,
                "size": int(len(self.indices)), "strata": self.plan.strata, "quotas": self.quotas,
                "taken_per_stratum": self.taken, "shortfall_filled": self.shortfall_filled,
                "notes": self.notes}
        if labels is not None:
            y = np.asarray(labels, dtype=bool)[self.indices]
            meta["positives"] = int(y.sum())
            meta["negatives"] = int(len(y) - y.sum())
        return meta


def _quotas(total: int, k: int) -> list[int]:
    base, extra = divmod(total, k)
    return [base + (1 if i < extra else 0) for i in range(k)]


def _stratified_draw(rng, pool: np.ndarray, aa: np.ndarray, total: int, k: int, notes: list[str], tag: str):
    if total >= len(pool):
        if total > len(pool):
            msg = f"{tag}: requested {total} but only {len(pool)} available; taking all"
            logger.warning(msg)
            notes.append(msg)
        bins = quantile_bins(aa[pool], k)
        return pool.copy(), bins, _quotas(min(total, len(pool)), k), np.bincount(bins, minlength=k).tolist(), 0
    bins = quantile_bins(aa[pool], k)
    quotas = _quotas(total, k)
    chosen, chosen_bins, taken = [], [], []
    used = np.zeros(len(pool), dtype=bool)
    for b in range(k):
        members = np.flatnonzero(bins == b)
        take = min(quotas[b], len(members))
        pick = np.sort(rng.choice(members, size=take, replace=False)) if take else members[:0]
        used[pick] = True
        chosen.append(pick)
        taken.append(int(take))
    short = total - sum(taken)
    if short:
        rest = np.flatnonzero(~used)
        extra = np.sort(rng.choice(rest, size=short, replace=False))
        chosen.append(extra)
        msg = f"{tag}: {short} pairs drawn uniformly to cover short strata"
        notes.append(msg)
    idx = np.concatenate(chosen)
    return pool[idx], bins[idx], quotas, taken, short


def stratified_sample(aa_scores, plan: SamplePlan, labels=None) -> Sample:
    """Draw an AA-stratified sample of pool indices.

    ``natural``: equal quotas over ``plan.strata`` equal-count AA bins of the
    whole pool.  ``balanced``: ``total // 2`` positives and the rest negatives,
    each class stratified over its own AA bins.  Short strata are topped up
    uniformly from the remaining pool.
    """
    aa = np.asarray(aa_scores, dtype=np.float64)
    if np.isnan(aa).any():
        raise ValueError("every pair needs an AA score")
    rng = np.random.default_rng(plan.seed)
    notes: list[str] = []
    if plan.mode == "natural":
        idx, strata, quotas, taken, short = _stratified_draw(rng, np.arange(len(aa)), aa, plan.total,
                                                             plan.strata, notes, "natural")
        return Sample(idx, strata, quotas, taken, short, plan, notes)
    if labels is None:
        raise ValueError("balanced sampling needs labels")
    y = np.asarray(labels, dtype=bool)
    n_pos = plan.total // 2
    parts = []
    for cls, want in ((True, n_pos), (False, plan.total - n_pos)):
        pool = np.flatnonzero(y == cls)
        parts.append(_stratified_draw(rng, pool, aa, want, plan.strata, notes,
                                      "positives" if cls else "negatives"))
    return Sample(
        indices=np.concatenate([p[0] for p in parts]),
        strata=np.concatenate([p[1] for p in parts]),
        quotas=parts[0][2] + parts[1][2],
        taken=list(parts[0][3]) + list(parts[1][3]),
        shortfall_filled=parts[0][4] + parts[1][4],
        plan=plan, notes=notes,
    )


def calibration_by_decile(aa_scores, verdicts, labels, k: int = 10) -> list[dict]:
    """TPR/FPR of binary verdicts inside each AA decile (``None`` when undefined)."""
    aa = np.asarray(aa_scores, dtype=np.float64)
    pred = np.asarray(verdicts, dtype=bool)
    y = np.asarray(labels, dtype=bool)
    bins = quantile_bins(aa, k)
    out = []
    for b in range(k):
        sel = bins == b
        pos = sel & y
        neg = sel & ~y
        out.append({
            "decile": b + 1,
            "n": int(sel.sum()),
            "positives": int(pos.sum()),
            "negatives": int(neg.sum()),
            "tpr": float((pred & pos).sum() / pos.sum()) if pos.any() else None,
            "fpr": float((pred & neg).sum() / neg.sum()) if neg.any() else None,
        })
    return out


@dataclass
class QuadrantResult:
    counts: dict[str, int]
    categories: list[str | None]
    thresholds: dict[str, float]
    llm_threshold: float

    @property
    def positives(self) -> int:
        return sum(self.counts.values())


def agreement_quadrants(aa_scores, llm_probs, labels, groups=None, llm_threshold: float = 0.5) -> QuadrantResult:
    """Place every positive pair in one of four AA / LLM agreement quadrants.

    The AA threshold is the median AA score among positives, computed per
    group (era) when ``groups`` is given.
    """
    aa = np.asarray(aa_scores, dtype=np.float64)
    llm = np.asarray(llm_probs, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if not y.any():
        raise ValueError("no positives")
    g = np.asarray(groups, dtype=object) if groups is not None else np.full(len(y), "all", dtype=object)
    thr = np.full(len(y), np.nan)
    thresholds = {}
    for key in sorted(set(g[y].tolist()), key=str):
        sel = g == key
        t = float(np.median(aa[sel & y]))
        thresholds[str(key)] = t
        thr[sel] = t
    counts = dict.fromkeys(QUADRANTS, 0)
    cats: list[str | None] = []
    for i in range(len(y)):
        if not y[i]:
            cats.append(None)
            continue
        a_hit = aa[i] >= thr[i]
        l_hit = llm[i] >= llm_threshold
        c = QUADRANTS[(0 if a_hit else 1) if l_hit else (2 if a_hit else 3)]
        counts[c] += 1
        cats.append(c)
    return QuadrantResult(counts, cats, thresholds, llm_threshold)


# --- reports ---------------------------------------------------------------

REPRODUCIBILITY_NOTE = (
    "Absolute AUROC values depend on the full OpenAlex co-authorship corpus and on the hosted "
    "LLM used; they are not expected to be reproduced by desk-scale or synthetic runs. This "
    "report is checked for internal consistency (oracle-verified metrics, class balance, "
    "quadrant conservation), not for agreement with published headline numbers."
)


def _clean(x):
    """Recursively convert numpy scalars and non-finite floats to JSON values."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def evaluate_sample(labels, scores: Mapping[str, Sequence[float]], aa=None, llm_probs=None,
                    groups=None, threshold: float = 0.5) -> dict:
    """AUROC per score column plus LLM rates, calibration, Spearman and quadrants."""
    y = np.asarray(labels, dtype=bool)
    res: dict = {"positives": int(y.sum()), "negatives": int(len(y) - y.sum()), "auroc": {},
                 "coverage": {}}
    for name, col in scores.items():
        col = np.asarray(col, dtype=np.float64)
        ok = ~np.isnan(col)
        res["coverage"][name] = int(ok.sum())
        yy = y[ok]
        res["auroc"][name] = auroc(col[ok], yy) if yy.any() and (~yy).any() else None
    if llm_probs is not None:
        p = np.asarray(llm_probs, dtype=np.float64)
        ok = ~np.isnan(p)
        yy = y[ok]
        if yy.any() and (~yy).any():
            res["llm_rates"] = asdict(recall_precision(p[ok], yy, threshold))
            if aa is not None:
                a = np.asarray(aa, dtype=np.float64)[ok]
                res["calibration"] = calibration_by_decile(a, p[ok] >= threshold, yy)
                res["spearman_aa_llm"] = spearman(a, p[ok])
        if aa is not None and yy.any():
            q = agreement_quadrants(np.asarray(aa)[ok], p[ok], yy,
                                    None if groups is None else np.asarray(groups, dtype=object)[ok],
                                    threshold)
            res["quadrants"] = {"counts": q.counts, "aa_thresholds": q.thresholds,
                                "llm_threshold": q.llm_threshold}
    return _clean(res)


@dataclass
class EvalReport:
    provenance: dict
    eras: list[dict]
    quadrants_total: dict = field(default_factory=dict)
    reproducibility_note: str = REPRODUCIBILITY_NOTE
    schema_version: int = 1

    def to_json(self) -> dict:
        return _clean(asdict(self))

    @classmethod
    def from_json(cls, obj: dict) -> "EvalReport":
        return cls(**obj)


def report_schema() -> dict:
    return json.loads(resources.files("collabpred").joinpath("report_schema.json").read_text(encoding="utf-8"))


def validate_report(obj: dict) -> None:
    import jsonschema

    jsonschema.validate(obj, report_schema())


def _write_csv(path: Path, header: list[str], rows: list[list], comments: Sequence[str] = ()) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        for line in comments:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["" if x is None else (f"{x:.6f}" if isinstance(x, float) else x) for x in r])


def emit_report(report: EvalReport, out_dir: str | Path) -> dict:
    """Write ``report.json`` plus CSV tables and per-figure dumps; returns the JSON object."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    obj = report.to_json()
    validate_report(obj)
    (out / "report.json").write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    auroc_rows, calib_rows, homophily_rows, degree_rows, topk_rows, path_rows, feat_rows = [], [], [], [], [], [], []
    edge_rows, pq_rows = [], []
    comments = header_lines(obj["provenance"])

    def write(path, header, rows):
        _write_csv(path, header, rows, comments)

    for era in obj["eras"]:
        name = era["name"]
        et = era.get("edge_types") or {}
        if et:
            edge_rows.append([name, et.get("continued"), et.get("new"), et.get("dropped"), et.get("train_edges"),
                              et.get("candidates"), et.get("candidate_positives"), et.get("recall_ceiling_in_scope")])
        for r in era.get("pq_sweep") or []:
            pq_rows.append([name, r["p"], r["q"], r["operator"], r["auroc"]])
        for task, ev in sorted(era.get("evaluations", {}).items()):
            for method, val in sorted(ev["auroc"].items()):
                auroc_rows.append([name, task, method, val, ev["positives"], ev["negatives"]])
            for c in ev.get("calibration", []):
                calib_rows.append([name, task, c["decile"], c["n"], c["tpr"], c["fpr"]])
        for h in era.get("homophily", []):
            homophily_rows.append([name, h["feature"], h["collab_rate"], h["noncollab_rate"], h["ratio"]])
        for f, val in sorted(era.get("feature_auroc", {}).items()):
            feat_rows.append([name, f, val])
        cs = era.get("coldstart") or {}
        for b in cs.get("cold_rate_by_degree_bin", []):
            degree_rows.append([name, b["bin"][0], b["bin"][1], b["new_edges"], b["cold"], b["rate"]])
        for t in cs.get("topk_sweep", []):
            topk_rows.append([name, t["K"], t["new_edges"], t["cold_count"], t["cold_rate"]])
        for d, cnt in cs.get("path_length_histogram", {}).items():
            path_rows.append([name, d, cnt])
    write(out / "table_auroc.csv", ["era", "task", "method", "auroc", "positives", "negatives"], auroc_rows)
    heur = [r for r in auroc_rows if r[1] == "natural" and r[2] in ("AA", "RA", "CN", "JC", "PA")]
    write(out / "table_heuristic_auroc.csv", ["era", "task", "method", "auroc", "positives", "negatives"], heur)
    cold = [r for r in auroc_rows if r[1] == "coldstart"]
    write(out / "table_coldstart.csv", ["era", "task", "method", "auroc", "positives", "negatives"], cold)
    write(out / "table_homophily.csv", ["era", "feature", "collab_same_rate", "noncollab_same_rate", "ratio"],
               homophily_rows)
    write(out / "table_feature_auroc.csv", ["era", "feature", "auroc"], feat_rows)
    write(out / "table_edge_types.csv", ["era", "continued", "new", "dropped", "train_edges", "candidates",
                                              "candidate_positives", "recall_ceiling"], edge_rows)
    if pq_rows:
        write(out / "table_pq_sweep.csv", ["era", "p", "q", "operator", "auroc"], pq_rows)
    write(out / "fig_calibration.csv", ["era", "task", "decile", "n", "tpr", "fpr"], calib_rows)
    write(out / "fig_coldstart_degree.csv", ["era", "bin_lo", "bin_hi", "new_edges", "cold", "rate"], degree_rows)
    write(out / "fig_coldstart_topk.csv", ["era", "K", "new_edges", "cold", "cold_rate"], topk_rows)
    write(out / "fig_coldstart_paths.csv", ["era", "distance", "count"], path_rows)
    return obj
