"""Stage 2: rescoring candidate clusters.

Two interchangeable scorers sit behind this module: a bag-of-entities
baseline that needs no ML at all (rule + gazetteer entity mentions plus
keyword counts), and an injection path for scores computed out of process
(see the scores.jsonl wire format). Either way the top k candidates per
query survive into the summarization pool.

All operations are pure; clusters can be processed concurrently per query.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from .retrieve import Cluster, _rank_entries


class EntityType(str, Enum):
    PERSON = "PERSON"
    LOCATION = "LOCATION"
    ORGANIZATION = "ORGANIZATION"
    NUMBER = "NUMBER"
    DATE = "DATE"
    TIME = "TIME"
    MONEY = "MONEY"
    PERCENT = "PERCENT"
    MISC = "MISC"


@dataclass(frozen=True)
class EntityMention:
    surface: str
    etype: EntityType
    span: tuple[int, int]  # [start, end) character offsets


@dataclass(frozen=True)
class QueryProfile:
    """Expected entity types and keywords for one query's information need."""

    expected_entity_types: frozenset[EntityType] = frozenset()
    keywords: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not self.expected_entity_types and not self.keywords:
            raise ValueError("profile needs at least one entity type or keyword")


@dataclass(frozen=True)
class RerankParams:
    k_stage2: int = 25

    def __post_init__(self) -> None:
        if self.k_stage2 <= 0:
            raise ValueError("k_stage2 must be > 0")


# --- rule tagger ------------------------------------------------------------

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_MONTHS = (
    r"(?:Jan(?:uary)?|Feb(?:ruary)?|Mar(?:ch)?|Apr(?:il)?|May|June?|July?"
    r"|Aug(?:ust)?|Sept?(?:ember)?|Oct(?:ober)?|Nov(?:ember)?|Dec(?:ember)?)"
)
_WEEKDAYS = r"(?:Monday|Tuesday|Wednesday|Thursday|Friday|Saturday|Sunday)"
_AMPM = r"(?:a\.m\.|p\.m\.|am\b|pm\b)"

# Order matters: earlier patterns claim their spans first, so "$2 million"
# never also yields a NUMBER for the 2. Month and weekday names stay
# case-sensitive to keep the modal verb "may" out of DATE.
_NUMERIC_PATTERNS: list[tuple[EntityType, re.Pattern[str]]] = [
    (
        EntityType.MONEY,
        re.compile(
            r"\$\s?\d+(?:,\d{3})*(?:\.\d+)?"
            r"(?:\s?(?i:thousand|million|billion|trillion|bn|k|m|b)\b)?"
        ),
    ),
    (EntityType.PERCENT, re.compile(r"\d+(?:\.\d+)?\s?(?:%|(?i:percent|pct)\b)")),
    (
        EntityType.TIME,
        re.compile(
            r"\b\d{1,2}:\d{2}(?::\d{2})?(?:\s?" + _AMPM + r")?|\b\d{1,2}\s?" + _AMPM
        ),
    ),
    (
        EntityType.DATE,
        re.compile(
            r"\b" + _MONTHS + r"\.?\s\d{1,2}(?:st|nd|rd|th)?(?:,?\s?\d{4})?\b"
            r"|\b" + _MONTHS + r"\.?\s\d{4}\b"
            r"|\b\d{1,2}(?:st|nd|rd|th)?\s" + _MONTHS + r"\b"
            r"|\b\d{4}-\d{2}-\d{2}\b"
            r"|\b\d{1,2}/\d{1,2}/\d{2,4}\b"
            r"|\b" + _WEEKDAYS + r"\b"
        ),
    ),
    (EntityType.NUMBER, re.compile(r"\b\d+(?:,\d{3})*(?:\.\d+)?\b")),
]

_GAZETTEER_TYPES = {EntityType.PERSON, EntityType.LOCATION, EntityType.ORGANIZATION}


def _tokenize_entry(surface: str) -> tuple[str, ...]:
    return tuple(t.lower() for t in _TOKEN_RE.findall(surface))


def load_gazetteer(path: Union[str, Path]) -> dict[tuple[str, ...], EntityType]:
    """Read a tab-separated surface<TAB>type gazetteer file."""
    table: dict[tuple[str, ...], EntityType] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                surface, type_name = line.split("\t")
                etype = EntityType(type_name)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad gazetteer line") from exc
            if etype not in _GAZETTEER_TYPES:
                raise ValueError(f"{path}:{lineno}: gazetteer type must be PERSON/LOCATION/ORGANIZATION")
            key = _tokenize_entry(surface)
            if key:
                table[key] = etype
    return table


@lru_cache(maxsize=1)
def _bundled_gazetteer() -> dict[tuple[str, ...], EntityType]:
    with resources.as_file(resources.files("factstream.data").joinpath("gazetteer.txt")) as p:
        return load_gazetteer(p)


class RuleTagger:
    """Deterministic mentions from numeric patterns, a gazetteer and casing.

    Numeric regexes claim NUMBER/MONEY/PERCENT/DATE/TIME spans first, the
    gazetteer claims LOCATION/PERSON/ORGANIZATION (longest token match,
    case-insensitive), and leftover runs of two or more capitalized tokens
    become MISC.
    """

    def __init__(self, gazetteer: Optional[Mapping[tuple[str, ...], EntityType]] = None) -> None:
        self.gazetteer = dict(gazetteer) if gazetteer is not None else _bundled_gazetteer()
        self._max_entry = max((len(k) for k in self.gazetteer), default=0)

    def tag(self, text: str, doc_id: Optional[str] = None) -> list[EntityMention]:
        mentions: list[EntityMention] = []
        claimed: list[tuple[int, int]] = []

        def free(start: int, end: int) -> bool:
            return all(end <= s or start >= e for s, e in claimed)

        for etype, pattern in _NUMERIC_PATTERNS:
            for m in pattern.finditer(text):
                if free(m.start(), m.end()):
                    mentions.append(EntityMention(m.group(0), etype, (m.start(), m.end())))
                    claimed.append((m.start(), m.end()))

        tokens = [(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]
        lowered = [t[0].lower() for t in tokens]
        token_free = [free(start, end) for _, start, end in tokens]

        i = 0
        while i < len(tokens):
            matched = 0
            for l in range(min(self._max_entry, len(tokens) - i), 0, -1):
                if not all(token_free[i : i + l]):
                    continue
                etype = self.gazetteer.get(tuple(lowered[i : i + l]))
                if etype is not None:
                    start, end = tokens[i][1], tokens[i + l - 1][2]
                    mentions.append(EntityMention(text[start:end], etype, (start, end)))
                    claimed.append((start, end))
                    for j in range(i, i + l):
                        token_free[j] = False
                    matched = l
                    break
            i += matched or 1

        run: list[int] = []
        for j in range(len(tokens) + 1):
            capitalized = (
                j < len(tokens)
                and token_free[j]
                and tokens[j][0][0].isalpha()
                and tokens[j][0][0].isupper()
            )
            if capitalized:
                run.append(j)
                continue
            if len(run) >= 2:
                start, end = tokens[run[0]][1], tokens[run[-1]][2]
                mentions.append(EntityMention(text[start:end], EntityType.MISC, (start, end)))
            run = []

        mentions.sort(key=lambda m: m.span)
        return mentions


class FileTagger:
    """Mentions precomputed by an external NER system, keyed by doc_id.

    File format: JSON lines of
    {"doc_id": str, "mentions": [{"surface", "etype", "start", "end"}]}.
    """

    def __init__(self, path: Union[str, Path]) -> None:
        self.path = str(path)
        self._by_doc: dict[str, list[EntityMention]] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    self._by_doc[str(rec["doc_id"])] = [
                        EntityMention(
                            surface=str(m["surface"]),
                            etype=EntityType(m["etype"]),
                            span=(int(m["start"]), int(m["end"])),
                        )
                        for m in rec["mentions"]
                    ]
                except (KeyError, ValueError, TypeError) as exc:
                    raise ValueError(f"{self.path}:{lineno}: bad annotation record: {exc}") from exc

    def tag(self, text: str, doc_id: Optional[str] = None) -> list[EntityMention]:
        if doc_id is None:
            raise ValueError("file tagger needs a doc_id")
        mentions = self._by_doc.get(doc_id, [])
        for m in mentions:
            if not (0 <= m.span[0] <= m.span[1] <= len(text)):
                raise ValueError(f"annotation span {m.span} outside text of doc {doc_id!r}")
        return mentions


Tagger = Union[RuleTagger, FileTagger]


def make_tagger(config: str) -> Tagger:
    """Build a tagger from a config string: rules | rules:<gaz> | file:<path>."""
    if config == "rules":
        return RuleTagger()
    if config.startswith("rules:"):
        return RuleTagger(load_gazetteer(config[len("rules:"):]))
    if config.startswith("file:"):
        return FileTagger(config[len("file:"):])
    raise ValueError(f"unknown tagger config {config!r}")


def tag_entities(
    text: str, tagger: Union[str, Tagger] = "rules", doc_id: Optional[str] = None
) -> list[EntityMention]:
    if isinstance(tagger, str):
        tagger = make_tagger(tagger)
    return tagger.tag(text, doc_id=doc_id)


# --- scoring ----------------------------------------------------------------

def _keyword_count(keyword: str, tokens: list[str]) -> int:
    needle = _tokenize_entry(keyword)
    if not needle:
        return 0
    n = len(needle)
    return sum(1 for i in range(len(tokens) - n + 1) if tuple(tokens[i : i + n]) == needle)


def boe_score(mentions: Iterable[EntityMention], text: str, profile: QueryProfile) -> float:
    """Frequency of expected entity types plus keyword occurrence counts."""
    score = sum(1 for m in mentions if m.etype in profile.expected_entity_types)
    tokens = [t.lower() for t in _TOKEN_RE.findall(text)]
    score += sum(_keyword_count(k, tokens) for k in sorted(profile.keywords))
    return float(score)


def load_scores(path: Union[str, Path]) -> dict[tuple[str, str], float]:
    """Read scores.jsonl: {"query_id", "doc_id", "score"} per line."""
    scores: dict[tuple[str, str], float] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                key = (str(rec["query_id"]), str(rec["doc_id"]))
                scores[key] = float(rec["score"])
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad score record: {exc}") from exc
    return scores


def inject_external_scores(
    cluster: Cluster, scores: Mapping[tuple[str, str], float]
) -> Cluster:
    """Replace cluster scores with externally computed ones and re-sort."""
    rescored: list[tuple[str, float]] = []
    for doc_id, _ in cluster.entries:
        key = (cluster.query_id, doc_id)
        if key not in scores:
            raise ValueError(f"missing external score for {key}")
        value = scores[key]
        if math.isnan(value):
            raise ValueError(f"external score for {key} is NaN")
        rescored.append((doc_id, value))
    return Cluster(query_id=cluster.query_id, entries=_rank_entries(rescored))


def select_top(cluster: Cluster, params: RerankParams) -> Cluster:
    """Keep the top k_stage2 entries (everything when shorter)."""
    return Cluster(query_id=cluster.query_id, entries=list(cluster.entries[: params.k_stage2]))
