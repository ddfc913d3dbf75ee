import json
from pathlib import Path

import httpx
import pytest

from collabpred.openalex import (AuthorUnknownError, OpenAlexClient, OpenAlexParseError, fetch_openalex_author,
                                 parse_author)

FIXTURE = Path(__file__).parent / "fixtures" / "openalex_author_A5023888391.json"


def _replay(statuses=None, body=None):
    """Transport serving the recorded author; ``statuses`` are returned first, in order."""
    body = body if body is not None else json.loads(FIXTURE.read_text())
    queue = list(statuses or [])
    seen = []

    def handler(request: httpx.Request):
        seen.append(request)
        if queue:
            return httpx.Response(queue.pop(0))
        if request.url.path.endswith("/A5023888391"):
            return httpx.Response(200, json=body)
        return httpx.Response(404, json={"error": "not found"})

    return httpx.MockTransport(handler), seen


def _client(tmp_path, transport, **kw):
    return OpenAlexClient(mailto="me@example.org", cache_dir=tmp_path / "cache", transport=transport,
                          sleep=lambda s: None, requests_per_second=None, **kw)


def test_recorded_fixture_parse():
    prof = parse_author(json.loads(FIXTURE.read_text()))
    assert prof.id == "A5023888391"
    assert prof.display_name == "Jane Q. Example"
    assert prof.institution == "Tsinghua University"
    assert prof.country_code == "CN" and prof.continent == "AS"
    assert prof.works_count == 84 and prof.cited_by_count == 2311
    assert len(prof.concepts) == 5
    assert prof.concepts == ("Computer science", "Artificial intelligence", "Machine learning",
                             "Computer vision", "Pattern recognition")
    assert prof.counts_by_year[2022] == (11, 430)
    assert ("Peking University", 2014, 2016) in prof.affiliations


def test_fetch_builds_request_and_caches(tmp_path):
    transport, seen = _replay()
    c = _client(tmp_path, transport)
    p1 = c.fetch("https://openalex.org/A5023888391")
    assert seen[0].url.path == "/authors/A5023888391"
    assert seen[0].url.params["mailto"] == "me@example.org"
    assert (tmp_path / "cache" / "A5023888391.json").exists()
    p2 = c.fetch("A5023888391")
    assert c.calls == 1 and len(seen) == 1
    assert p1 == p2


def test_cached_id_needs_no_network(tmp_path):
    (tmp_path / "cache").mkdir()
    (tmp_path / "cache" / "A5023888391.json").write_text(FIXTURE.read_text())

    def boom(request):
        raise AssertionError("network used")

    c = _client(tmp_path, httpx.MockTransport(boom))
    assert fetch_openalex_author("A5023888391", client=c).works_count == 84
    assert c.calls == 0


def test_unknown_author(tmp_path):
    transport, _ = _replay()
    with pytest.raises(AuthorUnknownError, match="author unknown"):
        _client(tmp_path, transport).fetch("A1")


def test_retries_on_429_and_5xx(tmp_path):
    transport, seen = _replay(statuses=[429, 503])
    sleeps = []
    c = OpenAlexClient(cache_dir=tmp_path, transport=transport, sleep=sleeps.append, requests_per_second=None,
                       backoff_base=1.0)
    assert c.fetch("A5023888391").display_name == "Jane Q. Example"
    assert len(seen) == 3
    assert sleeps == [1.0, 2.0]


def test_gives_up_after_cap(tmp_path):
    transport, seen = _replay(statuses=[500] * 10)
    c = _client(tmp_path, transport, max_attempts=3)
    with pytest.raises(RuntimeError, match="3 attempts"):
        c.fetch("A5023888391")
    assert len(seen) == 3


def test_malformed_body(tmp_path):
    transport = httpx.MockTransport(lambda r: httpx.Response(200, content=b"<html>oops</html>"))
    with pytest.raises(OpenAlexParseError):
        _client(tmp_path, transport).fetch("A5023888391")
    with pytest.raises(OpenAlexParseError):
        parse_author({"id": "https://openalex.org/A1", "works_count": "many"})


def test_fetch_many_in_order(tmp_path):
    transport, _ = _replay()
    out = _client(tmp_path, transport).fetch_many(["A5023888391", "A404", "A5023888391"], workers=2)
    assert out[0].id == "A5023888391" and out[2].id == "A5023888391"
    assert isinstance(out[1], AuthorUnknownError)
