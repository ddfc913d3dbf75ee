"""Thin per-author OpenAlex REST client with an on-disk cache.

Each fetched author is stored as the raw API JSON in ``<cache>/<id>.json``
so interrupted fetches resume without refetching.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

import httpx

from .countries import continent_for
from .graph import AuthorProfile
from .llm import RateLimiter

logger = logging.getLogger(__name__)

DEFAULT_ENDPOINT = "https://api.openalex.org"


class AuthorUnknownError(LookupError):
    pass


class OpenAlexParseError(ValueError):
    pass


def _short_id(author_id: str) -> str:
    # accept full URIs like https://openalex.org/A5023888391
    return author_id.rstrip("/").rsplit("/", 1)[-1]


def _institution(obj: dict) -> dict:
    inst = obj.get("last_known_institution")
    if not inst:
        many = obj.get("last_known_institutions") or []
        inst = many[0] if many else None
    return inst or {}


def parse_author(obj: dict) -> AuthorProfile:
    """Map an OpenAlex author object onto :class:`AuthorProfile`."""
    if not isinstance(obj, dict) or not obj.get("id"):
        raise OpenAlexParseError("author object without id")
    try:
        inst = _institution(obj)
        concepts = obj.get("x_concepts") or obj.get("concepts") or []
        concepts = sorted(concepts, key=lambda c: -float(c.get("score", 0.0)))
        names: list[str] = []
        for c in concepts:
            name = c.get("display_name")
            if name and name not in names:
                names.append(name)
        counts = {}
        for rec in obj.get("counts_by_year") or []:
            counts[int(rec["year"])] = (int(rec.get("works_count", 0)), int(rec.get("cited_by_count", 0)))
        affs = []
        for rec in obj.get("affiliations") or []:
            years = [int(y) for y in rec.get("years") or []]
            name = (rec.get("institution") or {}).get("display_name") or ""
            if years and name:
                affs.append((name, min(years), max(years)))
        cc = (inst.get("country_code") or "").upper()
        return AuthorProfile(
            id=_short_id(obj["id"]),
            display_name=obj.get("display_name") or "",
            institution=inst.get("display_name") or "",
            country_code=cc,
            continent=continent_for(cc),
            works_count=int(obj.get("works_count") or 0),
            cited_by_count=int(obj.get("cited_by_count") or 0),
            concepts=tuple(names),
            counts_by_year=counts,
            affiliations=tuple(affs),
        )
    except (TypeError, ValueError, KeyError, AttributeError) as exc:
        raise OpenAlexParseError(f"malformed author object: {exc}") from None


class OpenAlexClient:
    def __init__(self, endpoint: str = DEFAULT_ENDPOINT, mailto: str = "", cache_dir: str | Path | None = None,
                 transport: httpx.BaseTransport | None = None, max_attempts: int = 5,
                 backoff_base: float = 1.0, requests_per_second: float | None = 10.0,
                 sleep: Callable[[float], None] = time.sleep):
        self.endpoint = endpoint.rstrip("/")
        self.mailto = mailto
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self._http = httpx.Client(timeout=30.0, transport=transport)
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.limiter = RateLimiter(requests_per_second, sleep=sleep)
        self._sleep = sleep
        self.calls = 0
        self._lock = threading.Lock()

    def close(self) -> None:
        self._http.close()

    def _cache_path(self, sid: str) -> Path | None:
        return self.cache_dir / f"{sid}.json" if self.cache_dir else None

    def _get(self, sid: str) -> dict:
        params = {"mailto": self.mailto} if self.mailto else None
        url = f"{self.endpoint}/authors/{sid}"
        last = ""
        for attempt in range(self.max_attempts):
            self.limiter.acquire()
            with self._lock:
                self.calls += 1
            try:
                r = self._http.get(url, params=params)
            except httpx.TransportError as exc:
                last = str(exc)
            else:
                if r.status_code == 200:
                    try:
                        return r.json()
                    except ValueError:
                        raise OpenAlexParseError(f"{sid}: response is not JSON") from None
                if r.status_code == 404:
                    raise AuthorUnknownError(f"author unknown: {sid}")
                last = f"HTTP {r.status_code}"
                if r.status_code != 429 and r.status_code < 500:
                    raise RuntimeError(f"{sid}: {last}")
            if attempt + 1 < self.max_attempts:
                self._sleep(self.backoff_base * 2 ** attempt)
        raise RuntimeError(f"{sid}: giving up after {self.max_attempts} attempts ({last})")

    def fetch(self, author_id: str) -> AuthorProfile:
        sid = _short_id(author_id)
        path = self._cache_path(sid)
        if path is not None and path.exists():
            return parse_author(json.loads(path.read_text(encoding="utf-8")))
        obj = self._get(sid)
        prof = parse_author(obj)
        if path is not None:
            tmp = path.with_suffix(f".{threading.get_ident()}.tmp")
            tmp.write_text(json.dumps(obj), encoding="utf-8")
            os.replace(tmp, path)
        return prof

    def fetch_many(self, ids: Sequence[str], workers: int = 4) -> list[AuthorProfile | Exception]:
        """Profiles (or the raised exception) per id, in input order."""
        def one(a):
            try:
                return self.fetch(a)
            except Exception as exc:
                logger.warning("fetch %s failed: %s", a, exc)
                return exc
        with ThreadPoolExecutor(max_workers=max(1, workers)) as ex:
            return list(ex.map(one, ids))


def fetch_openalex_author(author_id: str, endpoint: str = DEFAULT_ENDPOINT, mailto: str = "",
                          cache_dir: str | Path | None = None, client: OpenAlexClient | None = None
                          ) -> AuthorProfile:
    if client is None:
        client = OpenAlexClient(endpoint, mailto, cache_dir)
    return client.fetch(author_id)
