"""Multi-source event stream ingestion, text normalization and day bucketing.

Incoming stream items (tweets, reddit posts, news sentences) are normalized
into a uniform text form at load time. Tweets get the full treatment:
retweet prefixes, mentions, URLs, emoji and emoticons are stripped, hashtags
are word-segmented. Other sources only lose URLs and surplus whitespace,
since their text already reads like regular prose.

Normalization is deterministic and idempotent; documents are immutable after
ingestion, so the corpus is safe for concurrent readers.
"""

from __future__ import annotations

import bisect
import json
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from .rerank import QueryProfile


class SourceType(str, Enum):
    TWITTER = "twitter"
    REDDIT = "reddit"
    NEWS = "news"


@dataclass(frozen=True)
class Document:
    """One stream item. `text` is the normalization of `raw_text`."""

    doc_id: str
    event_id: str
    source_type: SourceType
    timestamp: int
    raw_text: str
    text: str


@dataclass(frozen=True)
class Period:
    start: int  # inclusive, unix seconds
    end: int    # exclusive


@dataclass
class EventTimeline:
    """Ordered day periods of one event. Periods may be gapped, never overlap."""

    event_id: str
    periods: list[Period]

    def __post_init__(self) -> None:
        for p in self.periods:
            if p.start >= p.end:
                raise ValueError(f"timeline {self.event_id}: empty period {p}")
        for a, b in zip(self.periods, self.periods[1:]):
            if b.start < a.end:
                raise ValueError(f"timeline {self.event_id}: periods overlap or are unsorted")

    def __len__(self) -> int:
        return len(self.periods)


@dataclass
class Query:
    """An information request with indicative terms and a type/keyword profile."""

    query_id: str
    text: str
    indicative_terms: list[str]
    profile: "QueryProfile"

    def __post_init__(self) -> None:
        if not self.indicative_terms:
            raise ValueError(f"query {self.query_id}: indicative_terms must be non-empty")


# --- text normalization -----------------------------------------------------

_RT_PREFIX_RE = re.compile(r"^(?:\s*RT\s*@\w+\s*:?\s*)+", re.IGNORECASE)
_URL_RE = re.compile(r"(?:https?://\S+|www\.\S+)", re.IGNORECASE)
_MENTION_RE = re.compile(r"@\w+")
_HASHTAG_RE = re.compile(r"#(\w+)")
_WS_RE = re.compile(r"\s+")

# Emoji stripping covers four pictographic blocks plus the joiner/variation
# characters that would otherwise linger invisibly between them.
_EMOJI_RE = re.compile(
    "["
    "\U0001F300-\U0001F5FF"  # symbols & pictographs
    "\U0001F600-\U0001F64F"  # emoticons
    "\U0001F680-\U0001F6FF"  # transport & map
    "\U0001F900-\U0001F9FF"  # supplemental symbols
    "︎️‍"
    "]+"
)

# ASCII emoticons are removed only as standalone tokens, so ratios like
# "10:3" or words never match. The inventory is fixed and intentionally small.
_EMOTICONS = [
    ":-)", ":)", ":-(", ":(", ";-)", ";)", ":-D", ":D", ":-P", ":-p",
    ":P", ":p", ":-/", ":/", ":-\\", ":'(", ":-o", ":-O", ":o", ":O",
    "=)", "=(", "=D", "<3", "xD", "XD",
]
_EMOTICON_RE = re.compile(
    r"(?:(?<=\s)|^)(?:" + "|".join(re.escape(e) for e in _EMOTICONS) + r")(?=\s|$)"
)


@lru_cache(maxsize=1)
def _segment_words() -> tuple[frozenset[str], int]:
    """Bundled frequency wordlist (most frequent first) and its max length."""
    text = resources.files("factstream.data").joinpath("wordlist.txt").read_text("utf-8")
    words = frozenset(line.strip() for line in text.splitlines() if line.strip())
    return words, max(len(w) for w in words)


def segment_hashtag(tag: str) -> list[str]:
    """Split a hashtag body (leading '#' removed) into lowercase words.

    Camel-case boundaries are applied first, then greedy longest-match
    against the bundled wordlist. Residue with no dictionary match stays one
    token. The concatenated output always equals the lowercased input.
    """
    if not tag:
        return []
    pieces = re.split(
        r"(?<=[a-z])(?=[A-Z])|(?<=[A-Za-z])(?=[0-9])|(?<=[0-9])(?=[A-Za-z])", tag
    )
    words, max_len = _segment_words()
    out: list[str] = []
    for piece in pieces:
        piece = piece.lower()
        if not piece:
            continue
        if piece in words:
            out.append(piece)
            continue
        i = 0
        n = len(piece)
        residue_start: Optional[int] = None
        while i < n:
            match_len = 0
            for l in range(min(max_len, n - i), 0, -1):
                if piece[i : i + l] in words:
                    match_len = l
                    break
            if match_len:
                if residue_start is not None:
                    out.append(piece[residue_start:i])
                    residue_start = None
                out.append(piece[i : i + match_len])
                i += match_len
            else:
                if residue_start is None:
                    residue_start = i
                i += 1
        if residue_start is not None:
            out.append(piece[residue_start:])
    return out


def normalize_text(raw: str, source: SourceType) -> str:
    """Normalize one stream item deterministically (idempotent).

    Twitter: drop retweet prefixes, URLs, @-mentions, emoji and emoticons,
    then segment hashtags and collapse whitespace. Other sources: URLs and
    whitespace only.
    """
    text = raw
    if source is SourceType.TWITTER:
        text = _RT_PREFIX_RE.sub("", text)
        text = _URL_RE.sub(" ", text)
        text = _MENTION_RE.sub(" ", text)
        text = _EMOJI_RE.sub(" ", text)
        # Hashtags go before emoticons so a '#' stripped here cannot expose a
        # new emoticon boundary on a second pass.
        text = _HASHTAG_RE.sub(lambda m: " ".join(segment_hashtag(m.group(1))), text)
        text = text.replace("#", " ")
        text = _EMOTICON_RE.sub(" ", text)
    else:
        text = _URL_RE.sub(" ", text)
    return _WS_RE.sub(" ", text).strip()


def assign_period(doc: Document, timeline: EventTimeline) -> Optional[int]:
    """Index of the period containing doc.timestamp, or None if outside all."""
    starts = [p.start for p in timeline.periods]
    i = bisect.bisect_right(starts, doc.timestamp) - 1
    if i >= 0 and doc.timestamp < timeline.periods[i].end:
        return i
    return None


# --- wire formats -----------------------------------------------------------

_SOURCE_ALIASES = {
    "twitter": SourceType.TWITTER,
    "reddit": SourceType.REDDIT,
    "news": SourceType.NEWS,
}


def load_corpus(path: str | Path) -> list[Document]:
    """Read corpus.jsonl: one raw document per line, normalized on ingest."""
    docs: list[Document] = []
    seen: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                source = _SOURCE_ALIASES[rec["source_type"]]
                doc = Document(
                    doc_id=str(rec["doc_id"]),
                    event_id=str(rec["event_id"]),
                    source_type=source,
                    timestamp=int(rec["unix_timestamp"]),
                    raw_text=rec["text"],
                    text=normalize_text(rec["text"], source),
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad corpus record: {exc}") from exc
            if doc.timestamp <= 0:
                raise ValueError(f"{path}:{lineno}: timestamp must be > 0")
            key = (doc.event_id, doc.doc_id)
            if key in seen:
                raise ValueError(f"{path}:{lineno}: duplicate doc_id {doc.doc_id!r} in event {doc.event_id!r}")
            seen.add(key)
            docs.append(doc)
    return docs


def _parse_timeline(rec: dict) -> EventTimeline:
    periods = [Period(int(p["start"]), int(p["end"])) for p in rec["periods"]]
    return EventTimeline(event_id=str(rec["event_id"]), periods=periods)


def load_timeline(path: str | Path) -> EventTimeline:
    with open(path, encoding="utf-8") as fh:
        rec = json.load(fh)
    return _parse_timeline(rec)


def load_timelines(path: str | Path) -> dict[str, EventTimeline]:
    """timeline.json holding one event object or a list of them."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    records = payload if isinstance(payload, list) else [payload]
    out: dict[str, EventTimeline] = {}
    for rec in records:
        timeline = _parse_timeline(rec)
        if timeline.event_id in out:
            raise ValueError(f"{path}: duplicate timeline for event {timeline.event_id!r}")
        out[timeline.event_id] = timeline
    return out


def load_queries(path: str | Path) -> tuple[str, list[Query]]:
    """Read queries.json; returns (event_id, queries in file order)."""
    with open(path, encoding="utf-8") as fh:
        rec = json.load(fh)
    return _parse_queries(rec, path)


def load_query_sets(path: str | Path) -> dict[str, list[Query]]:
    """queries.json holding one event object or a list of them."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    records = payload if isinstance(payload, list) else [payload]
    out: dict[str, list[Query]] = {}
    for rec in records:
        event_id, queries = _parse_queries(rec, path)
        if event_id in out:
            raise ValueError(f"{path}: duplicate queries for event {event_id!r}")
        out[event_id] = queries
    return out


def _parse_queries(rec: dict, path: str | Path) -> tuple[str, list[Query]]:
    from .rerank import EntityType, QueryProfile  # deferred: rerank imports retrieve

    event_id = str(rec["event_id"])
    queries: list[Query] = []
    seen: set[str] = set()
    for q in rec["queries"]:
        qid = str(q["query_id"])
        if qid in seen:
            raise ValueError(f"{path}: duplicate query_id {qid!r}")
        seen.add(qid)
        indicative = [str(t) for t in q["indicative_terms"]]
        try:
            etypes = frozenset(EntityType(t) for t in q.get("entity_types", []))
        except ValueError as exc:
            raise ValueError(f"{path}: query {qid!r}: {exc}") from exc
        keywords = frozenset(str(k).lower() for k in q.get("keywords", []))
        if not etypes and not keywords:
            # Without an explicit profile the indicative terms double as keywords.
            keywords = frozenset(t.lower() for t in indicative)
        profile = QueryProfile(expected_entity_types=etypes, keywords=keywords)
        queries.append(
            Query(query_id=qid, text=str(q["text"]), indicative_terms=indicative, profile=profile)
        )
    return event_id, queries
