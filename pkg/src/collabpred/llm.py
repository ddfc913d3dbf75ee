"""Prompting an OpenAI-compatible chat endpoint to predict collaborations.

Prompts are rendered from author profiles by a fixed template; responses are
cached on disk, keyed by ``sha256(model, variant, prompt)``.  A deterministic
mock backend (:class:`MockBackend`) lets the whole pipeline run offline.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import httpx

from .graph import AuthorProfile

logger = logging.getLogger(__name__)

API_KEY_ENV = "LLM_API_KEY"
JSON_ONLY_SUFFIX = ('\n\nAnswer only in JSON, exactly in the form '
                    '{"collaborate": "yes" or "no", "probability": <number between 0 and 1>}.')


class PromptVariant(enum.Enum):
    BASE = "base"
    PLUS_COUNTRY = "plus_country"
    PLUS_ETHNICITY = "plus_ethnicity"
    PLUS_BOTH = "plus_both"
    PLUS_NETWORK_STATS = "plus_network_stats"
    NO_CONCEPTS = "no_concepts"
    ERA_RESTRICTED = "era_restricted"

    @classmethod
    def parse(cls, name: str) -> "PromptVariant":
        key = name.strip().lower().replace("-", "_").replace("+", "plus_")
        for v in cls:
            if v.value == key or v.name.lower() == key:
                return v
        raise ValueError(f"unknown prompt variant {name!r}")


@dataclass(frozen=True)
class EraProfile:
    """Era-scoped counts and institution used by the era-restricted variant."""

    institution: str
    works_count: int
    cited_by_count: int


def era_restricted_profile(p: AuthorProfile, years: tuple[int, int]) -> EraProfile:
    """Sum per-year counts up to ``years[1]``; latest affiliation active in the range."""
    if not p.counts_by_year:
        raise ValueError(f"profile {p.id} has no per-year counts")
    y0, y1 = years
    works = sum(w for y, (w, _) in p.counts_by_year.items() if y <= y1)
    cited = sum(c for y, (_, c) in p.counts_by_year.items() if y <= y1)
    inst = ""
    best = None
    for name, a, b in p.affiliations:
        if a <= y1 and b >= y0 and (best is None or b > best):
            inst, best = name, b
    return EraProfile(inst, works, cited)


def _profile_block(label: str, p: AuthorProfile, variant: PromptVariant, era: EraProfile | None) -> list[str]:
    inst = era.institution if era is not None else p.institution
    works = era.works_count if era is not None else p.works_count
    cited = era.cited_by_count if era is not None else p.cited_by_count
    lines = [
        f"{label}",
        f"Name: {p.display_name or p.id}",
        f"Institution: {inst or 'unknown'}",
        f"Works count: {works}",
        f"Cited-by count: {cited}",
    ]
    if variant is not PromptVariant.NO_CONCEPTS:
        lines.append(f"Research concepts: {', '.join(p.concepts) if p.concepts else 'none listed'}")
    if variant in (PromptVariant.PLUS_COUNTRY, PromptVariant.PLUS_BOTH):
        lines.append(f"Country: {p.country_code or 'unknown'}")
    if variant in (PromptVariant.PLUS_ETHNICITY, PromptVariant.PLUS_BOTH):
        lines.append(f"Ethnicity: {p.ethnicity or 'unknown'}")
    return lines


def build_prompt(a: AuthorProfile, b: AuthorProfile, variant: PromptVariant = PromptVariant.BASE,
                 extras: Mapping | None = None) -> str:
    """Render the prediction prompt for one author pair.

    ``extras`` supplies ``aa`` and ``cn`` for the network-statistics variant,
    ``era_a`` / ``era_b`` (:class:`EraProfile`) for the era-restricted one,
    and an optional ``eval_window`` (``(y0, y1)``) for the task line.
    """
    extras = dict(extras or {})
    era_a = era_b = None
    if variant is PromptVariant.PLUS_NETWORK_STATS and not {"aa", "cn"} <= extras.keys():
        raise ValueError("network-statistics prompt needs 'aa' and 'cn' extras")
    if variant is PromptVariant.ERA_RESTRICTED:
        if "era_a" not in extras or "era_b" not in extras:
            raise ValueError("era-restricted prompt needs 'era_a' and 'era_b' extras")
        era_a, era_b = extras["era_a"], extras["era_b"]
    window = extras.get("eval_window")
    when = f" ({window[0]}-{window[1]})" if window else ""
    lines = [
        "You are an expert in scientific collaboration networks.",
        f"Task: predict whether these two researchers will co-author within the evaluation window{when}.",
        "",
        *_profile_block("Researcher A", a, variant, era_a),
        "",
        *_profile_block("Researcher B", b, variant, era_b),
        "",
    ]
    if variant is PromptVariant.PLUS_NETWORK_STATS:
        lines += [f"Network statistics: Adamic-Adar = {extras['aa']}, common neighbors = {extras['cn']}", ""]
    lines.append('Respond with a JSON object: {"collaborate": "yes" or "no", "probability": <number between 0 and 1>}')
    return "\n".join(lines)


class UnparseableResponse(ValueError):
    pass


_JSON_OBJ = re.compile(r"\{[^{}]*\}", re.S)
_VERDICT = re.compile(r"\b(yes|no)\b", re.I)
_NUMBER = re.compile(r"(?<![\w.])(\d+(?:\.\d+)?|\.\d+)(?![\w.])")


def _clip(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise UnparseableResponse(f"probability {p} outside [0, 1]")
    return p


def parse_response(raw: str) -> tuple[str, float]:
    """Extract ``(verdict, probability)`` from a model reply.

    Tried in order: the first JSON object with ``collaborate``/``probability``
    keys; a standalone yes/no token (probability 1.0 / 0.0); a bare number in
    ``[0, 1]`` (verdict yes iff >= 0.5).
    """
    text = raw or ""
    for m in _JSON_OBJ.finditer(text):
        try:
            obj = json.loads(m.group(0))
        except json.JSONDecodeError:
            continue
        if not isinstance(obj, dict) or not ({"collaborate", "probability"} & obj.keys()):
            continue
        prob = obj.get("probability")
        verdict = str(obj.get("collaborate", "")).strip().lower()
        if prob is not None:
            try:
                p = _clip(float(prob))
            except (TypeError, ValueError):
                raise UnparseableResponse(f"bad probability {prob!r}") from None
            return ("yes" if p >= 0.5 else "no"), p
        if verdict in ("yes", "no"):
            return verdict, 1.0 if verdict == "yes" else 0.0
    tokens = {t.lower() for t in _VERDICT.findall(text)}
    if len(tokens) == 1:
        v = tokens.pop()
        return v, 1.0 if v == "yes" else 0.0
    nums = _NUMBER.findall(text.strip())
    if len(nums) == 1:
        p = float(nums[0])
        if 0.0 <= p <= 1.0:
            return ("yes" if p >= 0.5 else "no"), p
    raise UnparseableResponse(f"cannot parse response: {text[:200]!r}")


@dataclass(frozen=True)
class LlmPrediction:
    pair: tuple[int, int]
    verdict: str
    probability: float
    raw_response: str
    variant: PromptVariant
    model: str
    cached: bool = False


@dataclass(frozen=True)
class LlmError:
    pair: tuple[int, int]
    error: str
    raw_response: str = ""
    variant: PromptVariant = PromptVariant.BASE
    model: str = ""


@dataclass
class ClientConfig:
    base_url: str = "http://localhost:8000/v1"
    model: str = "Qwen/Qwen2.5-72B-Instruct"
    api_key_env: str = API_KEY_ENV
    requests_per_minute: float | None = 22.5
    max_in_flight: int = 4
    max_attempts: int = 3
    backoff_base: float = 2.0
    timeout: float = 120.0
    cache_dir: str | None = None

    @classmethod
    def from_json(cls, obj: dict | None) -> "ClientConfig":
        return cls(**(obj or {}))


class RateLimiter:
    """Minimum spacing between request starts, shared across threads."""

    def __init__(self, per_second: float | None, clock=time.monotonic, sleep=time.sleep):
        self.interval = 1.0 / per_second if per_second else 0.0
        self._next = 0.0
        self._lock = threading.Lock()
        self._clock = clock
        self._sleep = sleep

    def acquire(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = self._clock()
            wait = self._next - now
            self._next = max(now, self._next) + self.interval
        if wait > 0:
            self._sleep(wait)


class ResponseCache:
    """Content-addressed JSON files, one per (model, variant, prompt)."""

    def __init__(self, root: str | Path | None):
        self.root = Path(root) if root else None
        self._lock = threading.Lock()
        if self.root:
            self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(model: str, variant: PromptVariant, prompt: str) -> str:
        h = hashlib.sha256()
        for part in (model, variant.value, prompt):
            h.update(part.encode("utf-8"))
            h.update(b"\x00")
        return h.hexdigest()

    def get(self, key: str) -> str | None:
        if not self.root:
            return None
        path = self.root / f"{key}.json"
        try:
            return json.loads(path.read_text(encoding="utf-8"))["response"]
        except FileNotFoundError:
            return None

    def put(self, key: str, model: str, variant: PromptVariant, response: str) -> None:
        if not self.root:
            return
        path = self.root / f"{key}.json"
        tmp = path.with_suffix(f".{threading.get_ident()}.tmp")
        with self._lock:
            tmp.write_text(json.dumps({"model": model, "variant": variant.value, "response": response}),
                           encoding="utf-8")
            os.replace(tmp, path)


class ChatClient:
    """Minimal OpenAI-compatible ``/chat/completions`` client with retries."""

    def __init__(self, cfg: ClientConfig, transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.cfg = cfg
        key = os.environ.get(cfg.api_key_env, "")
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._http = httpx.Client(base_url=cfg.base_url.rstrip("/"), headers=headers,
                                  timeout=cfg.timeout, transport=transport)
        rps = cfg.requests_per_minute / 60.0 if cfg.requests_per_minute else None
        self.limiter = RateLimiter(rps, sleep=sleep)
        self._sleep = sleep
        self.calls = 0
        self._count_lock = threading.Lock()

    def close(self) -> None:
        self._http.close()

    def complete(self, prompt: str) -> str:
        body = {"model": self.cfg.model, "messages": [{"role": "user", "content": prompt}], "temperature": 0}
        last = None
        for attempt in range(self.cfg.max_attempts):
            self.limiter.acquire()
            with self._count_lock:
                self.calls += 1
            try:
                resp = self._http.post("/chat/completions", json=body)
            except httpx.TransportError as exc:
                last = f"transport error: {exc}"
            else:
                if resp.status_code == 200:
                    try:
                        return resp.json()["choices"][0]["message"]["content"] or ""
                    except (ValueError, KeyError, IndexError, TypeError) as exc:
                        raise RuntimeError(f"malformed completion body: {exc}") from None
                last = f"HTTP {resp.status_code}"
                if resp.status_code != 429 and resp.status_code < 500:
                    raise RuntimeError(last)
            if attempt + 1 < self.cfg.max_attempts:
                self._sleep(self.cfg.backoff_base * 2 ** attempt)
        raise RuntimeError(f"request failed after {self.cfg.max_attempts} attempts: {last}")


def predict(pairs: Sequence[tuple[int, int]], profiles: Mapping[int, AuthorProfile],
            variant: PromptVariant, client: ChatClient, extras: Sequence[Mapping] | Mapping | None = None
            ) -> list[LlmPrediction | LlmError]:
    """One prediction or error record per pair, in input order.

    Network or parse failures never abort the batch.  An unparseable reply is
    re-asked once with an explicit JSON-only instruction.
    """
    cache = ResponseCache(client.cfg.cache_dir)
    model = client.cfg.model

    def extras_for(i: int):
        if extras is None:
            return None
        return extras if isinstance(extras, Mapping) else extras[i]

    def one(i: int):
        u, v = int(pairs[i][0]), int(pairs[i][1])
        a, b = profiles.get(u), profiles.get(v)
        if a is None or b is None:
            return LlmError((u, v), "missing-profile", variant=variant, model=model)
        try:
            prompt = build_prompt(a, b, variant, extras_for(i))
        except ValueError as exc:
            return LlmError((u, v), str(exc), variant=variant, model=model)
        raw = ""
        for attempt_prompt in (prompt, prompt + JSON_ONLY_SUFFIX):
            key = cache.key(model, variant, attempt_prompt)
            cached = cache.get(key)
            hit = cached is not None
            if not hit:
                try:
                    cached = client.complete(attempt_prompt)
                except Exception as exc:  # per-pair failure record
                    return LlmError((u, v), str(exc), raw, variant, model)
            raw = cached
            try:
                verdict, prob = parse_response(raw)
            except UnparseableResponse:
                if not hit:
                    cache.put(key, model, variant, raw)
                continue
            if not hit:
                cache.put(key, model, variant, raw)
            return LlmPrediction((u, v), verdict, prob, raw, variant, model, hit)
        return LlmError((u, v), "unparseable response", raw, variant, model)

    n = len(pairs)
    workers = max(1, min(client.cfg.max_in_flight, n))
    if workers == 1:
        return [one(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(one, range(n)))


# --- offline backend -------------------------------------------------------

_CONCEPTS_LINE = re.compile(r"^Research concepts: (.*)$", re.M)
_WORKS_LINE = re.compile(r"^Works count: (\d+)$", re.M)


@dataclass
class MockBackend:
    """Deterministic stand-in for a chat endpoint, usable as an httpx transport.

    The reply probability rises with concept overlap and author productivity
    and carries seeded, prompt-hash-driven noise.  ``fail`` marks prompts that
    should get a 500 reply; ``style`` selects JSON, bare verdict or garbage.
    """

    seed: int = 0
    style: str = "json"
    fail: Callable[[str], bool] | None = None
    calls: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def probability(self, prompt: str) -> float:
        concepts = [set(c.strip().lower() for c in m.split(",")) for m in _CONCEPTS_LINE.findall(prompt)]
        overlap = 0.0
        if len(concepts) == 2 and concepts[0] | concepts[1]:
            overlap = len(concepts[0] & concepts[1]) / len(concepts[0] | concepts[1])
        works = [int(x) for x in _WORKS_LINE.findall(prompt)]
        prod = min(1.0, sum(works) / 400.0) if works else 0.0
        h = hashlib.sha256(f"{self.seed}:{prompt}".encode()).digest()
        noise = int.from_bytes(h[:8], "big") / 2 ** 64
        p = 0.15 + 0.55 * overlap + 0.1 * prod + 0.3 * (noise - 0.5)
        return round(min(max(p, 0.0), 1.0), 4)

    def reply(self, prompt: str) -> str:
        p = self.probability(prompt)
        if self.style == "verdict":
            return "Yes." if p >= 0.5 else "No."
        if self.style == "garbage" and "Answer only in JSON" not in prompt:
            return "I cannot tell."
        return json.dumps({"collaborate": "yes" if p >= 0.5 else "no", "probability": p})

    def __call__(self, request: httpx.Request) -> httpx.Response:
        with self._lock:
            self.calls += 1
        body = json.loads(request.content)
        prompt = body["messages"][-1]["content"]
        if self.fail is not None and self.fail(prompt):
            return httpx.Response(500, json={"error": "injected failure"})
        return httpx.Response(200, json={
            "id": "mock", "object": "chat.completion", "model": body.get("model", ""),
            "choices": [{"index": 0, "message": {"role": "assistant", "content": self.reply(prompt)},
                         "finish_reason": "stop"}],
        })

    def transport(self) -> httpx.MockTransport:
        return httpx.MockTransport(self)
