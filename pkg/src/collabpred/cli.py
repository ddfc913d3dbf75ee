"""``collabpred`` command-line entry point.

Every command reads its inputs from the output directory written by earlier
commands, so stages can be rerun or resumed independently::

    collabpred synth --out out
    collabpred ingest --out out
    collabpred split --out out
    ...
    collabpred report --out out

``collabpred run`` chains all of them.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import (MissingArtifact, header_lines, load_npz, provenance, read_json, require, save_npz,
                        write_json)
from .candidates import (DEFAULT_TOP_K, candidate_arrays, cold_start_profile, common_neighbor_counts,
                         label_pairs, pair_keys, sample_cold_start, write_candidates)
from .community import louvain, select_top_community, write_assignment, CommunityAssignment
from .config import ConfigError, RunConfig
from .embeddings import PQ_SWEEP, EmbeddingConfig, EmbeddingTable, node2vec, score_pairs
from .eras import EdgeClass, EdgeClassification, classify_edges, detect_boundaries, window_stats, write_classification, write_stats
from .evaluation import (QUADRANTS, EvalReport, SamplePlan, emit_report, evaluate_sample, stratified_sample)
from .graph import IngestError, build_snapshot, ingest_edges, ingest_profiles, load_snapshot, save_snapshot, write_edges, write_profiles
from .heuristics import score_batch, write_scores
from .llm import (ChatClient, ClientConfig, LlmPrediction, MockBackend, PromptVariant, era_restricted_profile,
                  predict)
from .metadata import FEATURES, SAME_FEATURES, feature_auroc_table, feature_matrix, homophily_ratio, write_feature_matrix
from .synthetic import SynthConfig, write_dataset

logger = logging.getLogger("collabpred")

SAMPLES = ("natural", "balanced", "coldstart")
SCORE_GROUPS = ("heuristics", "embeddings", "metadata")
# metadata columns that are used as pair scorers in the evaluation tables
META_SCORES = ("concept_overlap_count", "concept_jaccard", "cited_by_product", "works_product")


class Ctx:
    def __init__(self, cfg: RunConfig, args: argparse.Namespace):
        self.cfg = cfg
        self.args = args
        self.out = cfg.out
        self.out.mkdir(parents=True, exist_ok=True)
        self.workers = args.workers or os.cpu_count() or 1
        self._edges = None
        self._profiles = None

    def prov(self, command: str, **extra) -> dict:
        return provenance(self.cfg.digest(), self.cfg.seed, command, **extra)

    def era_names(self) -> list[str]:
        if self.args.era:
            return [self.cfg.era(e).name for e in self.args.era.split(",")]
        return [e.name for e in self.cfg.eras]

    def era_dir(self, name: str) -> Path:
        d = self.out / "eras" / name
        d.mkdir(parents=True, exist_ok=True)
        return d

    def edges(self):
        if self._edges is None:
            self._edges = ingest_edges(require(self.out / "ingest" / "edges.csv", "ingest"))
        return self._edges

    def profiles(self) -> dict:
        """Profiles keyed by dense author index."""
        if self._profiles is None:
            path = self.out / "ingest" / "profiles.jsonl"
            require(self.out / "ingest" / "summary.json", "ingest")
            index = self.edges().index
            self._profiles = {}
            if path.exists():
                for sid, p in ingest_profiles(path).items():
                    i = index.get(sid)
                    if i is not None:
                        self._profiles[i] = p
        return self._profiles


# --- stages ----------------------------------------------------------------

def cmd_synth(ctx: Ctx) -> None:
    scfg = SynthConfig.from_json({"seed": ctx.cfg.seed, **ctx.cfg["synthetic"]})
    ep, pp = write_dataset(scfg, ctx.out / "data")
    logger.info("wrote %s and %s", ep, pp)


def cmd_ingest(ctx: Ctx) -> None:
    edges_path = ctx.cfg.path("edges") or require(ctx.out / "data" / "edges.csv", "synth")
    profiles_path = ctx.cfg.path("profiles")
    if profiles_path is None and ctx.cfg.path("edges") is None:
        profiles_path = ctx.out / "data" / "profiles.jsonl"
    if not Path(edges_path).exists():
        raise ConfigError(f"edge file {edges_path} does not exist")
    if profiles_path is not None and not Path(profiles_path).exists():
        raise ConfigError(f"profile file {profiles_path} does not exist")
    edges = ingest_edges(edges_path)
    d = ctx.out / "ingest"
    d.mkdir(parents=True, exist_ok=True)
    prov = ctx.prov("ingest")
    write_edges(edges, d / "edges.csv", header_lines(prov))
    summary = {"authors": len(edges.index), "edge_rows": len(edges), "accepted_rows": edges.accepted_rows,
               "self_loops": edges.self_loops, "years": list(edges.years or []), "profiles": 0,
               "authors_without_profile": len(edges.index)}
    if profiles_path is not None:
        profs = ingest_profiles(profiles_path)
        index = edges.index
        ordered = sorted(profs.values(), key=lambda p: (index.get(p.id, len(index)), p.id))
        write_profiles(ordered, d / "profiles.jsonl")
        summary["profiles"] = len(profs)
        summary["authors_without_profile"] = sum(1 for sid in index.ids if sid not in profs)
    write_json(d / "summary.json", summary, prov)
    ctx._edges = None
    logger.info("ingested %d authors, %d edge rows", summary["authors"], summary["edge_rows"])


def _default_windows(edges) -> list[tuple[int, int]]:
    y0, y1 = edges.years
    return [(y, min(y + 1, y1)) for y in range(y0, y1 + 1, 2)]


def cmd_stats(ctx: Ctx) -> None:
    edges = ctx.edges()
    sc = ctx.cfg["stats"]
    windows = [tuple(w) for w in sc["windows"]] if sc["windows"] else _default_windows(edges)
    stats = window_stats(edges, windows)
    bounds = detect_boundaries(stats, spike=sc["spike"], decel=sc["decel"])
    d = ctx.out / "stats"
    d.mkdir(parents=True, exist_ok=True)
    prov = ctx.prov("stats")
    write_stats(stats, d / "window_stats.csv", header_lines(prov))
    write_json(d / "boundaries.json", {"boundaries": [b.__dict__ for b in bounds]}, prov)
    for b in bounds:
        logger.info("boundary (%s) between %s and %s", b.kind, b.after, b.before)


def cmd_split(ctx: Ctx) -> None:
    edges = ctx.edges()
    for name in ctx.era_names():
        era = ctx.cfg.era(name)
        d = ctx.era_dir(name)
        prov = ctx.prov("split", era=name)
        train = build_snapshot(edges, era.train_windows)
        ev = build_snapshot(edges, era.eval_window)
        cls = classify_edges(train, ev)
        save_snapshot(train, d / "train.npz", prov=prov)
        save_snapshot(ev, d / "eval.npz", prov=prov)
        save_npz(d / "edge_classes.npz", prov, n=np.array([cls.n]), continued=cls.continued, new=cls.new,
                 dropped=cls.dropped)
        write_classification(cls, d / "edge_classes.csv", edges.index, header_lines(prov))
        write_json(d / "split.json", {"era": era.to_json(), "train_nodes": train.node_count,
                                      "train_edges": train.edge_count, "eval_nodes": ev.node_count,
                                      "eval_edges": ev.edge_count, "edge_classes": cls.counts}, prov)
        logger.info("%s: train %d edges, eval %d edges, classes %s", name, train.edge_count, ev.edge_count,
                    cls.counts)


def _train(ctx: Ctx, name: str):
    return load_snapshot(require(ctx.era_dir(name) / "train.npz", "split"))


def _classes(ctx: Ctx, name: str) -> EdgeClassification:
    z = load_npz(ctx.era_dir(name) / "edge_classes.npz", "split")
    return EdgeClassification(int(z["n"][0]), z["continued"], z["new"], z["dropped"])


def cmd_communities(ctx: Ctx) -> None:
    cc = ctx.cfg["communities"]
    for name in ctx.era_names():
        train = _train(ctx, name)
        d = ctx.era_dir(name)
        prov = ctx.prov("communities", era=name)
        assignment = louvain(train, seed=ctx.cfg.seed, resolution=cc["resolution"])
        top = select_top_community(assignment, int(cc["top_k"]))
        top_nodes = np.sort(np.concatenate(top)) if top else np.zeros(0, dtype=np.int64)
        save_npz(d / "communities.npz", prov, nodes=assignment.nodes, labels=assignment.labels,
                 top_nodes=top_nodes, modularity=np.array([assignment.modularity]))
        write_assignment(assignment, d / "communities.csv", d / "communities.json", train.index,
                         {"provenance": prov, "top_k": int(cc["top_k"]), "top_nodes": int(len(top_nodes))},
                         header_lines(prov))
        logger.info("%s: %d communities, Q=%.4f, top community %d nodes", name, assignment.num_communities,
                    assignment.modularity, len(top_nodes))


def _assignment(ctx: Ctx, name: str, n: int):
    z = load_npz(ctx.era_dir(name) / "communities.npz", "communities")
    a = CommunityAssignment(n, z["nodes"], z["labels"], float(z["modularity"][0]))
    return a, z["top_nodes"]


def cmd_candidates(ctx: Ctx) -> None:
    for name in ctx.era_names():
        train = _train(ctx, name)
        cls = _classes(ctx, name)
        d = ctx.era_dir(name)
        prov = ctx.prov("candidates", era=name)
        scope = None
        if ctx.cfg["candidates"]["scope"] == "top_community":
            _, scope = _assignment(ctx, name, train.n)
        u, v, cn = candidate_arrays(train, scope, workers=ctx.workers)
        pairs = np.stack([u, v], axis=1)
        labels = label_pairs(pairs, cls.new, train.n)
        new_pairs = cls.pairs(EdgeClass.NEW)
        if scope is not None:
            mask = np.zeros(train.n, dtype=bool)
            mask[scope] = True
            new_pairs = new_pairs[mask[new_pairs[:, 0]] & mask[new_pairs[:, 1]]]
        save_npz(d / "candidates.npz", prov, u=u, v=v, cn=cn, label=labels)
        write_candidates(u, v, cn, labels, d / "candidates.csv", train.index, header_lines(prov))
        in_scope_new = len(new_pairs)
        write_json(d / "candidates.json", {
            "scope": ctx.cfg["candidates"]["scope"], "scope_nodes": None if scope is None else int(len(scope)),
            "candidates": int(len(u)), "positives": int(labels.sum()), "new_edges_in_scope": in_scope_new,
            "recall_ceiling": (int(labels.sum()) / in_scope_new) if in_scope_new else None}, prov)
        logger.info("%s: %d candidates, %d positives", name, len(u), int(labels.sum()))


def _candidates(ctx: Ctx, name: str):
    z = load_npz(ctx.era_dir(name) / "candidates.npz", "candidates")
    return np.stack([z["u"], z["v"]], axis=1), z["cn"], z["label"].astype(bool)


def _emb_cfg(ctx: Ctx, p: float | None = None, q: float | None = None) -> EmbeddingConfig:
    params = {"seed": ctx.cfg.seed, **ctx.cfg["embeddings"]["params"]}
    if p is not None:
        params.update(p=p, q=q)
    return EmbeddingConfig.from_json(params)


def _emb_name(p: float, q: float) -> str:
    return "embeddings.bin" if (p, q) == (1.0, 1.0) else f"embeddings_p{p:g}_q{q:g}.bin"


def cmd_train_embeddings(ctx: Ctx) -> None:
    settings = PQ_SWEEP if ctx.cfg["embeddings"]["pq_sweep"] else ((None, None),)
    for name in ctx.era_names():
        train = _train(ctx, name)
        d = ctx.era_dir(name)
        for p, q in settings:
            ecfg = _emb_cfg(ctx, p, q)
            table = node2vec(train, ecfg)
            fname = _emb_name(ecfg.p, ecfg.q)
            table.save(d / fname)
            prov = ctx.prov("train-embeddings", era=name, embedding_config=ecfg.digest())
            write_json(d / (fname + ".json"), {"config": ecfg.__dict__, "nodes": int(len(table.nodes)),
                                               "corpus_tokens": table.corpus_tokens}, prov)
            logger.info("%s: node2vec p=%g q=%g, %d nodes", name, ecfg.p, ecfg.q, len(table.nodes))


def _score_groups(ctx: Ctx) -> tuple[list[str], list[str]]:
    tokens = [t.strip() for t in (ctx.args.method or ",".join(SCORE_GROUPS)).split(",") if t.strip()]
    groups = [t for t in tokens if t in SCORE_GROUPS]
    heur = [t for t in tokens if t not in SCORE_GROUPS]
    if heur and "heuristics" not in groups:
        groups.append("heuristics")
    return groups, heur or list(ctx.cfg["heuristics"]["methods"])


def cmd_score(ctx: Ctx) -> None:
    groups, methods = _score_groups(ctx)
    for name in ctx.era_names():
        d = ctx.era_dir(name)
        pairs, _, _ = _candidates(ctx, name)
        prov = ctx.prov("score", era=name)
        if "heuristics" in groups:
            train = _train(ctx, name)
            table = score_batch(train, pairs, methods, seed=ctx.cfg.seed)
            save_npz(d / "scores_heuristics.npz", prov, **table)
            write_scores(pairs, table, d / "scores_heuristics.csv", train.index, header_lines(prov))
        if "embeddings" in groups:
            table = EmbeddingTable.load(require(d / "embeddings.bin", "train-embeddings"))
            cols = {f"n2v_{op}": score_pairs(table, pairs, op) for op in ctx.cfg["embeddings"]["operators"]}
            save_npz(d / "scores_embeddings.npz", prov, **cols)
        if "metadata" in groups:
            cols = feature_matrix(pairs, ctx.profiles())
            save_npz(d / "features.npz", prov, **cols)
            write_feature_matrix(pairs, cols, d / "features.csv", ctx.edges().index, header_lines(prov))
        logger.info("%s: scored %d pairs (%s)", name, len(pairs), ", ".join(groups))


def _aa(ctx: Ctx, name: str) -> np.ndarray:
    z = load_npz(ctx.era_dir(name) / "scores_heuristics.npz", "score")
    if "AA" not in z:
        raise MissingArtifact(ctx.era_dir(name) / "scores_heuristics.npz[AA]", "score --method AA")
    return z["AA"]


def cmd_sample(ctx: Ctx) -> None:
    sc = ctx.cfg["sampling"]
    for name in ctx.era_names():
        d = ctx.era_dir(name)
        pairs, _, labels = _candidates(ctx, name)
        aa = _aa(ctx, name)
        prov = ctx.prov("sample", era=name)
        nat = stratified_sample(aa, SamplePlan.natural(int(sc["natural_total"]), ctx.cfg.seed), labels)
        bal = stratified_sample(aa, SamplePlan.balanced(int(sc["balanced_total"]), ctx.cfg.seed), labels)
        save_npz(d / "samples.npz", prov, natural=nat.indices, natural_strata=nat.strata,
                 balanced=bal.indices, balanced_strata=bal.strata)
        write_json(d / "samples.json", {"natural": nat.metadata(labels), "balanced": bal.metadata(labels)}, prov)
        logger.info("%s: natural %d pairs, balanced %d pairs", name, len(nat.indices), len(bal.indices))


def cmd_coldstart(ctx: Ctx) -> None:
    sc = ctx.cfg["sampling"]
    for name in ctx.era_names():
        d = ctx.era_dir(name)
        train = _train(ctx, name)
        new = _classes(ctx, name).pairs(EdgeClass.NEW)
        assignment, _ = _assignment(ctx, name, train.n)
        prov = ctx.prov("coldstart", era=name)
        stats = cold_start_profile(train, new, k_list=DEFAULT_TOP_K, assignment=assignment)
        pairs, labels = sample_cold_start(train, new, k=int(sc["coldstart_k"]), total=int(sc["coldstart_total"]),
                                          seed=ctx.cfg.seed)
        save_npz(d / "coldstart_sample.npz", prov, pairs=pairs, label=labels)
        write_json(d / "coldstart.json", {"stats": stats.to_json(), "sample_positives": int(labels.sum()),
                                          "sample_negatives": int((~labels).sum())}, prov)
        logger.info("%s: %d new edges, recall ceiling %.3f, cold-start sample %d+%d", name, stats.new_edges,
                    stats.ceiling, int(labels.sum()), int((~labels).sum()))


def _sample_pairs(ctx: Ctx, name: str, sample: str):
    d = ctx.era_dir(name)
    if sample == "coldstart":
        z = load_npz(d / "coldstart_sample.npz", "coldstart")
        return z["pairs"], z["label"].astype(bool), None
    pairs, _, labels = _candidates(ctx, name)
    idx = load_npz(d / "samples.npz", "sample")[sample]
    return pairs[idx], labels[idx], idx


def _llm_client(ctx: Ctx) -> ChatClient:
    lc = ctx.cfg["llm"]
    client_cfg = dict(lc["client"])
    client_cfg.setdefault("cache_dir", str(ctx.cfg.path("cache") or ctx.out / "llm_cache"))
    transport = None
    if lc["backend"] == "mock":
        client_cfg.setdefault("requests_per_minute", None)
        client_cfg.setdefault("model", "mock-model")
        transport = MockBackend(seed=int(lc["mock_seed"])).transport()
    elif lc["backend"] != "http":
        raise ConfigError(f"unknown llm backend {lc['backend']!r}")
    return ChatClient(ClientConfig.from_json(client_cfg), transport=transport)


def _llm_extras(ctx: Ctx, name: str, pairs: np.ndarray, variant: PromptVariant, profiles: dict):
    era = ctx.cfg.era(name)
    base = {"eval_window": era.eval_window}
    if variant is PromptVariant.PLUS_NETWORK_STATS:
        train = _train(ctx, name)
        sc = score_batch(train, pairs, ("AA", "CN"))
        return [{**base, "aa": round(float(a), 2), "cn": int(c)} for a, c in zip(sc["AA"], sc["CN"])]
    if variant is PromptVariant.ERA_RESTRICTED:
        out = []
        for u, v in pairs:
            ex = dict(base)
            try:
                ex["era_a"] = era_restricted_profile(profiles[int(u)], era.train_span)
                ex["era_b"] = era_restricted_profile(profiles[int(v)], era.train_span)
            except (KeyError, ValueError):
                pass  # surfaces as a per-pair error record
            out.append(ex)
        return out
    return base


def cmd_llm(ctx: Ctx) -> None:
    lc = ctx.cfg["llm"]
    variants = [PromptVariant.parse(v) for v in (ctx.args.variant.split(",") if ctx.args.variant else lc["variants"])]
    samples = ctx.args.sample.split(",") if ctx.args.sample else list(lc["samples"])
    for s in samples:
        if s not in SAMPLES:
            raise ConfigError(f"unknown sample {s!r}; choose from {SAMPLES}")
    client = _llm_client(ctx)
    profiles = ctx.profiles()
    try:
        for name in ctx.era_names():
            d = ctx.era_dir(name)
            for s in samples:
                pairs, _, _ = _sample_pairs(ctx, name, s)
                for variant in variants:
                    extras = _llm_extras(ctx, name, pairs, variant, profiles)
                    results = predict([tuple(p) for p in pairs], profiles, variant, client, extras)
                    prov = ctx.prov("llm", era=name, sample=s, variant=variant.value, model=client.cfg.model)
                    _write_llm(d, s, variant, results, prov)
                    errors = sum(1 for r in results if not isinstance(r, LlmPrediction))
                    logger.info("%s/%s/%s: %d predictions, %d errors", name, s, variant.value,
                                len(results) - errors, errors)
    finally:
        client.close()


def _write_llm(d: Path, sample: str, variant: PromptVariant, results, prov) -> None:
    stem = f"llm_{variant.value}_{sample}"
    probs = np.full(len(results), np.nan)
    with (d / f"{stem}.jsonl").open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"provenance": prov}, sort_keys=True) + "\n")
        for i, r in enumerate(results):
            rec = {"u": r.pair[0], "v": r.pair[1], "raw": r.raw_response}
            if isinstance(r, LlmPrediction):
                probs[i] = r.probability
                rec.update(verdict=r.verdict, probability=r.probability)
            else:
                rec.update(error=r.error)
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    save_npz(d / f"{stem}.npz", prov, probability=probs)


def _optional(path: Path) -> dict:
    if not path.exists():
        return {}
    with np.load(path, allow_pickle=False) as z:
        return {k: z[k] for k in z.files if k != "provenance"}


def _scores_for(ctx: Ctx, name: str, sample: str, pairs: np.ndarray, idx) -> dict[str, np.ndarray]:
    d = ctx.era_dir(name)
    cols: dict[str, np.ndarray] = {}
    if idx is not None:
        heur = {k: v for k, v in load_npz(d / "scores_heuristics.npz", "score").items() if k != "provenance"}
        emb = _optional(d / "scores_embeddings.npz")
        feats = _optional(d / "features.npz")
        for src in (heur, emb):
            cols.update({k: v[idx] for k, v in src.items()})
        cols.update({k: feats[k][idx] for k in META_SCORES if k in feats})
    else:
        train = _train(ctx, name)
        cols.update(score_batch(train, pairs, ctx.cfg["heuristics"]["methods"], seed=ctx.cfg.seed))
        if (d / "embeddings.bin").exists():
            table = EmbeddingTable.load(d / "embeddings.bin")
            cols.update({f"n2v_{op}": score_pairs(table, pairs, op) for op in ctx.cfg["embeddings"]["operators"]})
        feats = feature_matrix(pairs, ctx.profiles())
        cols.update({k: feats[k] for k in META_SCORES})
    for path in sorted(d.glob(f"llm_*_{sample}.npz")):
        variant = path.stem[len("llm_"):-len(sample) - 1]
        cols[f"LLM:{variant}"] = _optional(path)["probability"]
    return cols


def _pq_sweep(ctx: Ctx, name: str, pairs: np.ndarray, labels: np.ndarray) -> list[dict]:
    from .evaluation import auroc

    d = ctx.era_dir(name)
    out = []
    for p, q in PQ_SWEEP:
        path = d / _emb_name(p, q)
        if not path.exists():
            continue
        s = score_pairs(EmbeddingTable.load(path), pairs, "cosine")
        ok = ~np.isnan(s)
        y = labels[ok]
        out.append({"p": p, "q": q, "operator": "cosine",
                    "auroc": auroc(s[ok], y) if y.any() and (~y).any() else None})
    return out if len(out) > 1 else []


def cmd_evaluate(ctx: Ctx) -> None:
    threshold = float(ctx.cfg["evaluation"]["llm_threshold"])
    for name in ctx.era_names():
        d = ctx.era_dir(name)
        require(d / "scores_heuristics.npz", "score")
        require(d / "samples.npz", "sample")
        prov = ctx.prov("evaluate", era=name)
        samples_meta = read_json(d / "samples.json", "sample")
        evaluations = {}
        for s in SAMPLES:
            if s == "coldstart" and not (d / "coldstart_sample.npz").exists():
                continue
            pairs, labels, idx = _sample_pairs(ctx, name, s)
            if not labels.any() or labels.all():
                logger.warning("%s/%s: single-class sample, skipped", name, s)
                continue
            cols = _scores_for(ctx, name, s, pairs, idx)
            llm_cols = sorted(k for k in cols if k.startswith("LLM:"))
            primary = "LLM:base" if "LLM:base" in cols else (llm_cols[0] if llm_cols else None)
            ev = evaluate_sample(labels, cols, aa=cols.get("AA"), llm_probs=cols.get(primary) if primary else None,
                                 threshold=threshold)
            ev["llm_column"] = primary
            ev["sample"] = samples_meta.get(s) or {"mode": s, "size": int(len(labels)),
                                                  "positives": int(labels.sum()),
                                                  "negatives": int((~labels).sum())}
            evaluations[s] = ev
        pool_pairs, _, pool_labels = _candidates(ctx, name)
        era_obj = {"name": name, "evaluations": evaluations, "homophily": [], "feature_auroc": {}}
        feats = _optional(d / "features.npz")
        if feats:
            for f in SAME_FEATURES:
                try:
                    h = homophily_ratio(feats[f], pool_labels, f)
                    era_obj["homophily"].append(h.__dict__)
                except ValueError as exc:
                    logger.warning("%s: %s", name, exc)
            era_obj["feature_auroc"] = feature_auroc_table(feats, pool_labels, FEATURES)
        split = read_json(d / "split.json", "split")
        cand = read_json(d / "candidates.json", "candidates")
        era_obj["edge_types"] = {**split["edge_classes"], "train_edges": split["train_edges"],
                                 "candidates": cand["candidates"], "candidate_positives": cand["positives"],
                                 "recall_ceiling_in_scope": cand["recall_ceiling"]}
        cs = d / "coldstart.json"
        if cs.exists():
            era_obj["coldstart"] = read_json(cs, "coldstart")["stats"]
        if "balanced" in evaluations:
            bp, bl, _ = _sample_pairs(ctx, name, "balanced")
            era_obj["pq_sweep"] = _pq_sweep(ctx, name, bp, bl)
        write_json(d / "evaluation.json", era_obj, prov)
        logger.info("%s: evaluated %s", name, ", ".join(evaluations))


def cmd_report(ctx: Ctx) -> None:
    eras = []
    for name in ctx.era_names():
        obj = read_json(ctx.era_dir(name) / "evaluation.json", "evaluate")
        obj.pop("provenance", None)
        eras.append(obj)
    total = dict.fromkeys(QUADRANTS, 0)
    for e in eras:
        q = e["evaluations"].get("balanced", {}).get("quadrants")
        for k, v in (q or {}).get("counts", {}).items():
            total[k] += v
    lc = ctx.cfg["llm"]
    prov = ctx.prov("report", eras=",".join(e["name"] for e in eras),
                    sampling=ctx.cfg["sampling"], embedding_config=_emb_cfg(ctx).__dict__,
                    pq_sweep=[list(x) for x in PQ_SWEEP] if ctx.cfg["embeddings"]["pq_sweep"] else None,
                    llm={"backend": lc["backend"], "variants": lc["variants"],
                         "model": lc["client"].get("model", "mock-model" if lc["backend"] == "mock" else "")})
    report = EvalReport(provenance=prov, eras=eras, quadrants_total=total)
    emit_report(report, ctx.out / "report")
    logger.info("report written to %s", ctx.out / "report")


PIPELINE = ("ingest", "stats", "split", "communities", "candidates", "train-embeddings", "score", "sample",
            "coldstart", "llm", "evaluate", "report")

COMMANDS = {
    "synth": cmd_synth, "ingest": cmd_ingest, "stats": cmd_stats, "split": cmd_split,
    "communities": cmd_communities, "candidates": cmd_candidates, "train-embeddings": cmd_train_embeddings,
    "score": cmd_score, "sample": cmd_sample, "coldstart": cmd_coldstart, "llm": cmd_llm,
    "evaluate": cmd_evaluate, "report": cmd_report,
}


def cmd_run(ctx: Ctx) -> None:
    if ctx.cfg.path("edges") is None and not (ctx.out / "data" / "edges.csv").exists():
        cmd_synth(ctx)
    for step in PIPELINE:
        logger.info("== %s", step)
        COMMANDS[step](ctx)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory (overrides paths.out)")
    common.add_argument("--era", help="comma-separated era names (default: all)")
    common.add_argument("--seed", type=int, help="global seed (overrides config)")
    common.add_argument("--workers", type=int, help="worker processes for candidates/scoring")
    common.add_argument("--method", help="score groups or heuristic names, comma-separated")
    common.add_argument("--variant", help="prompt variant(s) for `llm`")
    common.add_argument("--sample", help="sample(s) for `llm`: natural, balanced, coldstart")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="collabpred", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["run"]:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("httpx").setLevel(logging.WARNING)
    overrides: dict = {}
    if args.out:
        overrides["paths"] = {"out": str(Path(args.out).resolve())}
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        cfg = RunConfig.load(args.config, overrides)
        ctx = Ctx(cfg, args)
        (cmd_run if args.command == "run" else COMMANDS[args.command])(ctx)
    except MissingArtifact as exc:
        logger.error("%s", exc)
        return 3
    except (ConfigError, IngestError, ValueError, KeyError, RuntimeError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
