"""Scholar-profile page parsing and polite, budgeted harvesting of t10.

Pages come from a :class:`PageSource`. Tests and the CLI use
:class:`FixtureStore`, a directory laid out as::

    <root>/<profile_id>/page-<n>.html     one file per pagination page
    <root>/search/<query-hash>.html       manual-search result pages

Profile page markup contract (CSS ids/classes the parser relies on)::

    <div id="gsc_prf" data-profile-id="...">            profile id
    <table id="gsc_rsb_st">                             stats table
      <tr><td class="gsc_rsb_sc1">h-index</td><td class="gsc_rsb_std">15</td>...
      <tr><td class="gsc_rsb_sc1">i10-index</td><td class="gsc_rsb_std">11</td>...
    <table id="gsc_a_t">                                publication table
      <tr class="gsc_a_tr">
        <td class="gsc_a_t"><a class="gsc_a_at">title</a>...</td>
        <td class="gsc_a_c">1,024</td>                  citations (blank = 0)
    <button id="gsc_bpf_more">                          present and not
                                                        ``disabled`` = more pages

Search page markup::

    <div id="gs_res_ccl">
      <div class="gs_ai" data-profile-id="...">         candidate profile card
      <div class="gs_r"><h3 class="gs_rt">title</h3>
          <a class="gs_cit">Cited by 123</a></div>      publication result
"""

from __future__ import annotations

import datetime as dt
import hashlib
import html
import logging
import re
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field, replace
from html.parser import HTMLParser
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .errors import AmbiguousProfile, MergeError, ParseError, ScholarRankError
from .roster import CollectionMethod, FacultyRecord, Snapshot, normalize_name

logger = logging.getLogger(__name__)

T10_RANK = 10


@dataclass(frozen=True)
class Publication:
    title: str
    citations: int


@dataclass(frozen=True)
class ScholarProfile:
    profile_id: str | None
    publications: tuple[Publication, ...]
    h_index: int | None = None
    i10: int | None = None
    complete: bool = False
    has_more: bool = False

    @property
    def citations(self) -> list[int]:
        return [p.citations for p in self.publications]


@dataclass(frozen=True)
class FetchPolicy:
    min_interval: float = 3.0
    per_faculty_budget: float = 300.0
    user_agent: str = "scholarrank/0.1 (+fixture harvester)"

    def __post_init__(self):
        if not self.min_interval > 0:
            raise ScholarRankError(f"min_interval must be positive, got {self.min_interval}")
        if not self.per_faculty_budget > 0:
            raise ScholarRankError(f"per_faculty_budget must be positive, got {self.per_faculty_budget}")


@dataclass(frozen=True)
class CitationRecord:
    faculty_id: str
    t10: int
    h_index: int | None
    i10: int | None
    method: CollectionMethod
    collected_at: dt.date | None = None
    profile_id: str | None = None


@dataclass(frozen=True)
class Aborted:
    """Harvest gave up; the faculty member's t10 stays uncollected."""

    faculty_id: str
    reason: str
    elapsed: float = 0.0


# --- citation indices -----------------------------------------------------

def derive_t10(citations: Iterable[int]) -> int:
    """Citations of the 10th most-cited paper; 0 with fewer than ten papers."""
    ranked = sorted(citations, reverse=True)
    if len(ranked) < T10_RANK:
        return 0
    return ranked[T10_RANK - 1]


def h_index(citations: Iterable[int]) -> int:
    ranked = sorted(citations, reverse=True)
    h = 0
    for i, c in enumerate(ranked, start=1):
        if c >= i:
            h = i
        else:
            break
    return h


def i10_index(citations: Iterable[int]) -> int:
    return sum(1 for c in citations if c > 10)


# --- parsing --------------------------------------------------------------

_SEPARATORS = re.compile("[,.\\s\\u00a0\\u202f\\u2009'\\u2019_]")


def _parse_count(text: str, row: int | None = None) -> int:
    cleaned = _SEPARATORS.sub("", text.replace("*", ""))
    if not cleaned:
        return 0
    # int() accepts any Unicode decimal digits, covering locale digit sets
    if not all(ch.isdecimal() for ch in cleaned):
        raise ParseError(f"non-numeric citation count {text.strip()!r}", row=row)
    return int(cleaned)


def _classes(attrs) -> set[str]:
    for name, value in attrs:
        if name == "class" and value:
            return set(value.split())
    return set()


def _attr(attrs, key):
    for name, value in attrs:
        if name == key:
            return value
    return None


class _ProfilePageParser(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.profile_id = None
        self.found_table = False
        self.has_more = False
        self.rows: list[tuple[str, str]] = []
        self.stats: dict[str, str] = {}
        self._in_pub_row = False
        self._title: list[str] = []
        self._cite: list[str] | None = None
        self._capture = None  # ("title" | "cite" | "label" | "value", tag)
        self._in_stats = False
        self._stat_label: list[str] = []
        self._stat_value: list[str] | None = None
        self._stat_done = False

    def handle_starttag(self, tag, attrs):
        classes = _classes(attrs)
        elem_id = _attr(attrs, "id")
        if self.profile_id is None and elem_id == "gsc_prf":
            self.profile_id = _attr(attrs, "data-profile-id")
        if elem_id == "gsc_a_t":
            self.found_table = True
        elif elem_id == "gsc_rsb_st":
            self._in_stats = True
        elif elem_id == "gsc_bpf_more":
            self.has_more = not any(name == "disabled" for name, _ in attrs)

        if tag == "tr":
            if "gsc_a_tr" in classes:
                self._in_pub_row = True
                self._title = []
                self._cite = None
            elif self._in_stats:
                self._stat_label = []
                self._stat_value = None
                self._stat_done = False
        if self._capture is not None:
            return
        if self._in_pub_row:
            if tag == "a" and "gsc_a_at" in classes:
                self._capture = ("title", tag)
            elif tag == "td" and "gsc_a_c" in classes:
                self._cite = []
                self._capture = ("cite", tag)
        elif self._in_stats and tag == "td":
            if "gsc_rsb_sc1" in classes:
                self._capture = ("label", tag)
            elif "gsc_rsb_std" in classes and not self._stat_done:
                self._stat_value = []
                self._capture = ("value", tag)

    def handle_endtag(self, tag):
        if self._capture is not None and tag == self._capture[1]:
            if self._capture[0] == "value":
                self._stat_done = True
            self._capture = None
        if tag == "tr":
            if self._in_pub_row:
                if self._cite is None:
                    raise ParseError("missing citation cell", row=len(self.rows) + 1)
                self.rows.append(("".join(self._title), "".join(self._cite)))
                self._in_pub_row = False
            elif self._in_stats and self._stat_value is not None:
                label = " ".join("".join(self._stat_label).split()).lower()
                self.stats[label] = "".join(self._stat_value)
                self._stat_value = None
        elif tag == "table" and self._in_stats:
            self._in_stats = False

    def handle_data(self, data):
        if self._capture is None:
            return
        kind = self._capture[0]
        if kind == "title":
            self._title.append(data)
        elif kind == "cite":
            self._cite.append(data)
        elif kind == "label":
            self._stat_label.append(data)
        elif kind == "value":
            self._stat_value.append(data)


def _decode_html(page: bytes | str) -> str:
    if isinstance(page, bytes):
        return page.decode("utf-8", errors="replace")
    return page


def parse_profile_page(page: bytes | str) -> ScholarProfile:
    """Extract publication rows and stated indices from one profile page.

    Rows keep their listed order; the result is marked incomplete until
    passed through :func:`merge_profile_pages`.
    """
    parser = _ProfilePageParser()
    parser.feed(_decode_html(page))
    parser.close()
    if not parser.found_table:
        raise ParseError("publication table (#gsc_a_t) not found")
    pubs = []
    for i, (title, cite) in enumerate(parser.rows, start=1):
        pubs.append(Publication(" ".join(title.split()), _parse_count(cite, row=i)))
    stats = {}
    for key, label in (("h_index", "h-index"), ("i10", "i10-index")):
        if label in parser.stats:
            stats[key] = _parse_count(parser.stats[label])
    return ScholarProfile(
        profile_id=parser.profile_id,
        publications=tuple(pubs),
        h_index=stats.get("h_index"),
        i10=stats.get("i10"),
        complete=False,
        has_more=parser.has_more,
    )


class _SearchPageParser(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.found = False
        self.candidates: list[str] = []
        self.results: list[tuple[str, str]] = []
        self._in_result = False
        self._result_depth = 0
        self._title: list[str] = []
        self._cite = ""
        self._capture = None

    def handle_starttag(self, tag, attrs):
        classes = _classes(attrs)
        if _attr(attrs, "id") == "gs_res_ccl":
            self.found = True
        if "gs_ai" in classes:
            pid = _attr(attrs, "data-profile-id")
            if pid:
                self.candidates.append(pid)
        if tag == "div":
            if self._in_result:
                self._result_depth += 1
            elif "gs_r" in classes:
                self._in_result = True
                self._result_depth = 1
                self._title = []
                self._cite = ""
        if self._in_result and self._capture is None:
            if "gs_rt" in classes:
                self._capture = ("title", tag)
            elif "gs_cit" in classes:
                self._capture = ("cite", tag)

    def handle_endtag(self, tag):
        if self._capture is not None and tag == self._capture[1]:
            self._capture = None
        if tag == "div" and self._in_result:
            self._result_depth -= 1
            if self._result_depth == 0:
                self._in_result = False
                self.results.append(("".join(self._title), self._cite))

    def handle_data(self, data):
        if self._capture is None:
            return
        if self._capture[0] == "title":
            self._title.append(data)
        else:
            self._cite += data


_CITED_BY = re.compile("(\\d[\\d,.\\s\\u00a0\\u202f\\u2009]*)")


def parse_search_page(page: bytes | str) -> tuple[list[str], list[Publication]]:
    """Return (candidate profile ids, publication results) of a search page."""
    parser = _SearchPageParser()
    parser.feed(_decode_html(page))
    parser.close()
    if not parser.found:
        raise ParseError("search results container (#gs_res_ccl) not found")
    pubs = []
    for i, (title, cite) in enumerate(parser.results, start=1):
        match = _CITED_BY.search(cite)
        count = _parse_count(match.group(1), row=i) if match else 0
        pubs.append(Publication(" ".join(title.split()), count))
    return parser.candidates, pubs


def merge_profile_pages(pages: Sequence[ScholarProfile]) -> ScholarProfile:
    """Concatenate pagination pages into one complete, re-sorted profile."""
    if not pages:
        raise MergeError("no pages to merge")
    ids = {p.profile_id for p in pages}
    if len(ids) > 1:
        raise MergeError(f"pages from different profiles: {sorted(map(str, ids))}")
    pubs = [pub for page in pages for pub in page.publications]
    # stable sort keeps listed order among equal counts
    pubs.sort(key=lambda p: p.citations, reverse=True)
    first = pages[0]
    merged = ScholarProfile(
        profile_id=first.profile_id,
        publications=tuple(pubs),
        h_index=first.h_index,
        i10=first.i10,
        complete=True,
        has_more=False,
    )
    if merged.h_index is not None:
        computed = h_index(merged.citations)
        if computed != merged.h_index:
            logger.warning(
                "profile %s: stated h-index %d differs from %d computed over %d listed papers",
                merged.profile_id, merged.h_index, computed, len(pubs),
            )
    return merged


def render_profile_page(profile_id: str, publications: Iterable[tuple[str, int | str]],
                        h_index: int | None = None, i10: int | None = None,
                        has_more: bool = False) -> str:
    """Produce a page in the fixture markup. Citation values are written verbatim."""
    out = [
        "<!DOCTYPE html>",
        "<html><head><meta charset=\"utf-8\"><title>Profile</title></head><body>",
        f'<div id="gsc_prf" data-profile-id="{html.escape(profile_id)}"></div>',
        '<table id="gsc_rsb_st"><thead><tr><th></th><th>All</th><th>Since 2017</th></tr></thead><tbody>',
    ]
    for label, value in (("h-index", h_index), ("i10-index", i10)):
        if value is not None:
            out.append(
                f'<tr><td class="gsc_rsb_sc1"><a class="gsc_rsb_f">{label}</a></td>'
                f'<td class="gsc_rsb_std">{value}</td><td class="gsc_rsb_std">{value // 2}</td></tr>'
            )
    out.append('</tbody></table>')
    out.append('<table id="gsc_a_t"><tbody id="gsc_a_b">')
    for title, cites in publications:
        out.append(
            '<tr class="gsc_a_tr"><td class="gsc_a_t">'
            f'<a href="#" class="gsc_a_at">{html.escape(title)}</a>'
            '<div class="gs_gray">A Author, B Author</div></td>'
            f'<td class="gsc_a_c"><a class="gsc_a_ac gs_ibl">{cites}</a></td>'
            '<td class="gsc_a_y"><span class="gsc_a_h">2019</span></td></tr>'
        )
    out.append("</tbody></table>")
    if has_more:
        out.append('<button type="button" id="gsc_bpf_more">Show more</button>')
    else:
        out.append('<button type="button" id="gsc_bpf_more" disabled>Show more</button>')
    out.append("</body></html>")
    return "\n".join(out) + "\n"


def render_search_page(candidates: Iterable[str] = (),
                       results: Iterable[tuple[str, int]] = ()) -> str:
    out = ['<html><body><div id="gs_res_ccl">']
    for pid in candidates:
        out.append(f'<div class="gs_ai gs_scl" data-profile-id="{html.escape(pid)}">'
                   f'<h3 class="gs_ai_name">{html.escape(pid)}</h3></div>')
    for title, cites in results:
        cite = f'<a class="gs_cit" href="#">Cited by {cites}</a>' if cites else ""
        out.append(f'<div class="gs_r gs_or"><h3 class="gs_rt"><a>{html.escape(title)}</a></h3>'
                   f'<div class="gs_fl">{cite}</div></div>')
    out.append("</div></body></html>")
    return "\n".join(out) + "\n"


# --- page sources and scheduling ------------------------------------------

def search_query(faculty: FacultyRecord) -> str:
    return f"{faculty.name_canonical} {normalize_name(faculty.university)}"


def query_hash(query: str) -> str:
    return hashlib.sha1(query.encode("utf-8")).hexdigest()[:16]


class PageSource(Protocol):
    def profile_page(self, profile_id: str, page: int) -> bytes | None: ...

    def search_page(self, query: str) -> bytes | None: ...


class FixtureStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    def profile_page(self, profile_id: str, page: int) -> bytes | None:
        path = self.root / profile_id / f"page-{page}.html"
        return path.read_bytes() if path.is_file() else None

    def search_page(self, query: str) -> bytes | None:
        path = self.root / "search" / f"{query_hash(query)}.html"
        return path.read_bytes() if path.is_file() else None


class HttpPageSource:
    """Best-effort live source built from URL templates.

    ``profile_url`` takes ``{profile_id}`` and ``{start}`` (0-based row offset);
    ``search_url`` takes ``{query}``. Not exercised by the test suite.
    """

    def __init__(self, profile_url: str, search_url: str, policy: FetchPolicy,
                 page_size: int = 100, timeout: float = 30.0):
        self.profile_url = profile_url
        self.search_url = search_url
        self.policy = policy
        self.page_size = page_size
        self.timeout = timeout

    def _get(self, url: str) -> bytes | None:
        request = urllib.request.Request(url, headers={"User-Agent": self.policy.user_agent})
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                return resp.read()
        except urllib.error.HTTPError as exc:
            if exc.code == 404:
                return None
            raise

    def profile_page(self, profile_id: str, page: int) -> bytes | None:
        start = (page - 1) * self.page_size
        return self._get(self.profile_url.format(profile_id=profile_id, start=start))

    def search_page(self, query: str) -> bytes | None:
        return self._get(self.search_url.format(query=urllib.request.quote(query)))


def next_fetch_time(policy: FetchPolicy, last_request: float) -> float:
    """Earliest time the next request to the same host may be issued."""
    return last_request + policy.min_interval


class SimulatedClock:
    """Deterministic clock: ``sleep`` advances time instantly."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            self._now += seconds


class MonotonicClock:
    def now(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class BudgetExceeded(Exception):
    pass


@dataclass
class PoliteFetcher:
    """Single-queue fetcher that spaces requests by ``policy.min_interval``.

    Each request is charged one ``min_interval`` slot against the current
    per-faculty budget; a request whose slot would end past the budget is
    refused with :class:`BudgetExceeded` instead of being issued.
    """

    source: PageSource
    policy: FetchPolicy = field(default_factory=FetchPolicy)
    clock: SimulatedClock | MonotonicClock = field(default_factory=SimulatedClock)
    request_times: list[float] = field(default_factory=list)
    _budget_start: float | None = None

    def start_budget(self) -> None:
        self._budget_start = None

    @property
    def elapsed(self) -> float:
        if self._budget_start is None or not self.request_times:
            return 0.0
        return self.request_times[-1] + self.policy.min_interval - self._budget_start

    def _wait_turn(self) -> float:
        t = self.clock.now()
        if self.request_times:
            t = max(t, next_fetch_time(self.policy, self.request_times[-1]))
        if self._budget_start is not None:
            if t + self.policy.min_interval - self._budget_start > self.policy.per_faculty_budget:
                raise BudgetExceeded()
        self.clock.sleep(t - self.clock.now())
        if self._budget_start is None:
            self._budget_start = t
        self.request_times.append(t)
        return t

    def profile_page(self, profile_id: str, page: int) -> bytes | None:
        self._wait_turn()
        return self.source.profile_page(profile_id, page)

    def search_page(self, query: str) -> bytes | None:
        self._wait_turn()
        return self.source.search_page(query)


def _fetch_profile(fetcher: PoliteFetcher, profile_id: str) -> ScholarProfile | None:
    pages = []
    n = 1
    while True:
        raw = fetcher.profile_page(profile_id, n)
        if raw is None:
            if n == 1:
                return None
            logger.warning("profile %s: page %d missing despite 'more' marker", profile_id, n)
            break
        page = parse_profile_page(raw)
        if page.profile_id is None:
            page = replace(page, profile_id=profile_id)
        pages.append(page)
        if not page.has_more:
            break
        n += 1
    return merge_profile_pages(pages)


def harvest_faculty(source: PageSource | PoliteFetcher, faculty: FacultyRecord,
                    policy: FetchPolicy | None = None,
                    collected_at: dt.date | None = None) -> CitationRecord | Aborted:
    """Collect one faculty member's t10 from a page source.

    With a known profile id the profile pages are read; otherwise the
    manual-search page decides: one candidate profile is followed, several
    raise :class:`AmbiguousProfile`, none means t10 is read off the listed
    search results (``method=manual``).
    """
    if isinstance(source, PoliteFetcher):
        fetcher = source
    else:
        fetcher = PoliteFetcher(source, policy or FetchPolicy())
    fetcher.start_budget()
    method = CollectionMethod.AUTO
    try:
        profile_id = faculty.scholar_profile_id
        if profile_id is None:
            raw = fetcher.search_page(search_query(faculty))
            if raw is None:
                return Aborted(faculty.faculty_id, "no search results", fetcher.elapsed)
            candidates, results = parse_search_page(raw)
            if len(candidates) > 1:
                raise AmbiguousProfile(faculty.faculty_id, candidates)
            if not candidates:
                return CitationRecord(
                    faculty.faculty_id, derive_t10(p.citations for p in results),
                    None, None, CollectionMethod.MANUAL, collected_at,
                )
            profile_id = candidates[0]
        profile = _fetch_profile(fetcher, profile_id)
    except BudgetExceeded:
        return Aborted(
            faculty.faculty_id,
            f"exceeded {fetcher.policy.per_faculty_budget:g} s budget",
            fetcher.elapsed,
        )
    if profile is None:
        return Aborted(faculty.faculty_id, f"profile {profile_id} not found", fetcher.elapsed)
    return CitationRecord(
        faculty.faculty_id, derive_t10(profile.citations), profile.h_index, profile.i10,
        method, collected_at, profile_id,
    )


@dataclass
class HarvestLog:
    collected: list[CitationRecord] = field(default_factory=list)
    aborted: list[Aborted] = field(default_factory=list)
    ambiguous: list[AmbiguousProfile] = field(default_factory=list)


def apply_citations(snapshot: Snapshot, records: Iterable[CitationRecord]) -> Snapshot:
    """Fill citation columns of the matching faculty records."""
    by_id = {r.faculty_id: r for r in records}
    updated = []
    for f in snapshot.faculty:
        r = by_id.get(f.faculty_id)
        if r is None:
            updated.append(f)
            continue
        updated.append(replace(
            f, t10=r.t10, h_index=r.h_index, i10=r.i10, collection_method=r.method,
            scholar_profile_id=r.profile_id or f.scholar_profile_id,
        ))
    return snapshot.with_faculty(updated)


def harvest_snapshot(snapshot: Snapshot, source: PageSource, policy: FetchPolicy | None = None,
                     clock=None, collected_at: dt.date | None = None,
                     only_missing: bool = True) -> tuple[Snapshot, HarvestLog]:
    """Harvest every faculty member (by default only those lacking t10)."""
    fetcher = PoliteFetcher(source, policy or FetchPolicy(), clock or SimulatedClock())
    log = HarvestLog()
    for f in snapshot.faculty:
        if only_missing and f.t10 is not None:
            continue
        try:
            result = harvest_faculty(fetcher, f, collected_at=collected_at)
        except AmbiguousProfile as exc:
            log.ambiguous.append(exc)
            continue
        if isinstance(result, Aborted):
            log.aborted.append(result)
        else:
            log.collected.append(result)
    return apply_citations(snapshot, log.collected), log
