"""JSON run configuration for the CLI pipeline."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .eras import DEFAULT_ERAS, EraConfig

DEFAULTS: dict = {
    "paths": {"edges": None, "profiles": None, "cache": None, "out": "out"},
    "seed": 0,
    "synthetic": {},
    "eras": [e.to_json() for e in DEFAULT_ERAS],
    "stats": {"windows": None, "spike": 2.0, "decel": 1.0},
    "communities": {"top_k": 1, "resolution": 1.0},
    "candidates": {"scope": "top_community"},
    "heuristics": {"methods": ["CN", "JC", "AA", "RA", "PA", "Random"]},
    "embeddings": {"operators": ["cosine", "hadamard_dot", "neg_l1", "neg_l2"], "pq_sweep": False,
                   "params": {}},
    "sampling": {"natural_total": 5000, "balanced_total": 500, "coldstart_k": 1000, "coldstart_total": 500},
    "llm": {"backend": "mock", "mock_seed": 0, "variants": ["base"], "samples": ["natural", "balanced"],
            "client": {}},
    "evaluation": {"llm_threshold": 0.5},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    base_dir: Path = Path(".")

    @classmethod
    def load(cls, path: str | Path | None, overrides: dict | None = None) -> "RunConfig":
        raw: dict = {}
        base = Path(".")
        if path is not None:
            p = Path(path)
            if not p.exists():
                raise ConfigError(f"config file {p} not found")
            try:
                raw = json.loads(p.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{p}: invalid JSON ({exc})") from None
            base = p.resolve().parent
        unknown = set(raw) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(_merge(DEFAULTS, raw), base)
        if overrides:
            cfg.raw = _merge(cfg.raw, overrides)
        cfg.eras  # validate early
        return cfg

    def __getitem__(self, key):
        return self.raw[key]

    def path(self, key: str) -> Path | None:
        v = self.raw["paths"].get(key)
        if v is None:
            return None
        p = Path(v)
        return p if p.is_absolute() else (self.base_dir / p)

    @property
    def out(self) -> Path:
        return self.path("out")

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def eras(self) -> list[EraConfig]:
        try:
            eras = [EraConfig.from_json(e) for e in self.raw["eras"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid era definition: {exc}") from None
        names = [e.name for e in eras]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate era names")
        return eras

    def era(self, name: str) -> EraConfig:
        for e in self.eras:
            if e.name == name:
                return e
        raise ConfigError(f"unknown era {name!r}; configured: {[e.name for e in self.eras]}")

    def digest(self) -> str:
        """Hash of everything except output/cache locations."""
        body = {k: v for k, v in self.raw.items() if k != "paths"}
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]
