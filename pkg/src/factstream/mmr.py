"""Stage 3b: final importance scores via relaxed maximal marginal relevance.

The selected documents are greedily reordered: at each step every unpicked
document is scored lambda * relevance - (1 - lambda) * max redundancy
against everything already picked today plus all past summaries of the
event, and the best one is appended with its pick-time score. Relevance is
the number of matched queries times the mean reranker score, so documents
answering several queries rise. Redundancy is TF-IDF cosine under a model
fit on the current day's pool; past-summary texts are vectorized under the
same model, which is how yesterday's facts penalize today's repeats.

Days within one event must run in temporal order (the past-summary set
grows monotonically); distinct events are independent.

Known limitation: near-identical sentences that differ only in a number
(rising burned-acres counts and the like) look almost identical to TF-IDF
cosine and are penalized as repeats even when the number is the news.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .analyzer import Analyzer
from .select import Selection


@dataclass(frozen=True)
class MmrParams:
    lambda_: float = 0.8

    def __post_init__(self) -> None:
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ValueError("lambda must be in [0, 1]")


@dataclass
class RelevanceRecord:
    """Per-document reranker scores keyed by the queries that matched it."""

    doc_id: str
    per_query_scores: dict[str, float]

    @property
    def matched_queries(self) -> set[str]:
        return set(self.per_query_scores)


def relevance(record: RelevanceRecord) -> float:
    """Matched-query count times the mean per-query score."""
    if not record.per_query_scores:
        raise ValueError(f"doc {record.doc_id!r}: no matched queries")
    scores = [record.per_query_scores[q] for q in sorted(record.per_query_scores)]
    return len(scores) * (sum(scores) / len(scores))


class TfidfModel:
    """Raw-count TF with idf = ln(1 + N/df), fit on one event-day pool.

    Texts outside the pool (past summaries) are vectorized under the same
    vocabulary; unseen terms are dropped.
    """

    def __init__(self, texts: Iterable[str], analyzer: Optional[Analyzer] = None) -> None:
        self.analyzer = analyzer or Analyzer()
        docs = [self.analyzer.tokens(t) for t in texts]
        self.n_docs = len(docs)
        df: dict[str, int] = {}
        for tokens in docs:
            for term in set(tokens):
                df[term] = df.get(term, 0) + 1
        self.idf = {t: math.log(1.0 + self.n_docs / n) for t, n in df.items()}

    def vectorize(self, text: str) -> dict[str, float]:
        vec: dict[str, float] = {}
        for term in self.analyzer.tokens(text):
            if term in self.idf:
                vec[term] = vec.get(term, 0.0) + self.idf[term]
        return vec


def _cosine(a: Mapping[str, float], b: Mapping[str, float]) -> float:
    if not a or not b:
        return 0.0
    if a == b:
        return 1.0  # exact, so verbatim duplicates are penalized by exactly 1-lambda
    if len(b) < len(a):
        a, b = b, a
    # Sorted term order keeps the sum bit-identical under argument swap.
    dot = sum(a[t] * b[t] for t in sorted(a) if t in b)
    if dot == 0.0:
        return 0.0
    norm_a = math.sqrt(sum(v * v for v in a.values()))
    norm_b = math.sqrt(sum(v * v for v in b.values()))
    return dot / (norm_a * norm_b)


def tfidf_redundancy(text_i: str, text_j: str, model: TfidfModel) -> float:
    """Cosine similarity of the TF-IDF vectors; 0 when either is empty."""
    return _cosine(model.vectorize(text_i), model.vectorize(text_j))


@dataclass
class SummaryState:
    """Per-event scoring state: today's picks, all past summaries, the model."""

    selected: list[tuple[str, str]] = field(default_factory=list)   # today's (doc_id, text)
    past: dict[str, str] = field(default_factory=dict)              # doc_id -> text
    tfidf_model: Optional[TfidfModel] = None


def update_past(state: SummaryState, summary: Iterable[tuple[str, str]]) -> SummaryState:
    """Fold a finished day's summary into the past set and reset the day."""
    for doc_id, text in summary:
        state.past[doc_id] = text
    state.selected = []
    return state


def mmr_rank(
    selection: Selection,
    records: Mapping[str, RelevanceRecord],
    texts: Mapping[str, str],
    state: SummaryState,
    params: MmrParams,
) -> list[tuple[str, float]]:
    """Greedy relaxed-MMR pass over the whole selection (no cutoff).

    Returns (doc_id, pick-time score) in pick order; ties on the score go to
    the ascending doc_id. The max over an empty penalty set is 0, so the very
    first pick of an event is scored on pure relevance.
    """
    if state.tfidf_model is None:
        raise ValueError("state.tfidf_model must be fit before ranking")
    model = state.tfidf_model

    candidates = sorted(selection.chosen)
    rel = {d: relevance(records[d]) for d in candidates}
    vecs = {d: model.vectorize(texts[d]) for d in candidates}
    penalty_vecs: list[dict[str, float]] = [
        model.vectorize(text) for _, text in sorted(state.past.items())
    ]

    lam = params.lambda_
    ranked: list[tuple[str, float]] = []
    remaining = list(candidates)
    while remaining:
        best_doc: Optional[str] = None
        best_score = -math.inf
        for d in remaining:
            max_red = 0.0
            for pv in penalty_vecs:
                red = _cosine(vecs[d], pv)
                if red > max_red:
                    max_red = red
            score = lam * rel[d] - (1.0 - lam) * max_red
            if score > best_score:
                best_score = score
                best_doc = d
        assert best_doc is not None
        ranked.append((best_doc, best_score))
        remaining.remove(best_doc)
        penalty_vecs.append(vecs[best_doc])
        state.selected.append((best_doc, texts[best_doc]))
    return ranked
