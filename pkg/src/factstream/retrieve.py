"""Stage 1: lexical retrieval over an event-day slice.

BM25 with pseudo-relevance feedback: a first pass ranks the slice for the
concatenated query text + indicative terms, the top feedback documents feed
a divergence-from-randomness term expansion, and a second weighted pass
produces the candidate cluster. Exact duplicates (byte-equal normalized
text) are dropped before the top-k cut, since retweet-heavy streams would
otherwise fill the cluster with copies.

The index is immutable once built; scoring and retrieval are read-only and
callable concurrently.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .analyzer import Analyzer
from .corpus import Document, Query


@dataclass(frozen=True)
class RetrievalParams:
    """BM25 and feedback knobs. Defaults follow common toolkit settings."""

    k1: float = 1.2
    b: float = 0.75
    k_stage1: int = 100
    fb_docs: int = 3
    fb_terms: int = 10
    use_expansion: bool = True

    def __post_init__(self) -> None:
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")
        if self.k_stage1 <= 0:
            raise ValueError("k_stage1 must be > 0")
        if self.fb_docs < 1 or self.fb_terms < 1:
            raise ValueError("fb_docs and fb_terms must be >= 1")


@dataclass
class Cluster:
    """Per-query ranked candidates: (doc_id, score), score desc, doc_id asc."""

    query_id: str
    entries: list[tuple[str, float]] = field(default_factory=list)

    def doc_ids(self) -> list[str]:
        return [doc_id for doc_id, _ in self.entries]


def _rank_entries(scored: Iterable[tuple[str, float]]) -> list[tuple[str, float]]:
    return sorted(scored, key=lambda e: (-e[1], e[0]))


class InvertedIndex:
    """Postings, lengths and collection statistics for one document slice."""

    def __init__(self, docs: Sequence[Document], analyzer: Analyzer) -> None:
        if not docs:
            raise ValueError("empty corpus")
        self.analyzer = analyzer
        self.docs: list[Document] = list(docs)
        self.N = len(self.docs)
        self.postings: dict[str, list[tuple[int, int]]] = {}
        self.doc_lengths: list[int] = []
        self.doc_terms: list[Counter[str]] = []
        self.collection_tf: Counter[str] = Counter()
        self._ordinal = {doc.doc_id: i for i, doc in enumerate(self.docs)}
        for i, doc in enumerate(self.docs):
            counts = Counter(analyzer.tokens(doc.text))
            self.doc_terms.append(counts)
            self.doc_lengths.append(sum(counts.values()))
            for term, tf in counts.items():
                self.postings.setdefault(term, []).append((i, tf))
                self.collection_tf[term] += tf
        self.avg_doc_length = sum(self.doc_lengths) / self.N

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def idf(self, term: str) -> float:
        n = self.df(term)
        return math.log((self.N - n + 0.5) / (n + 0.5) + 1.0)

    def ordinal(self, doc_id: str) -> int:
        return self._ordinal[doc_id]


def build_index(docs: Sequence[Document], analyzer: Analyzer | None = None) -> InvertedIndex:
    return InvertedIndex(docs, analyzer or Analyzer())


def _as_weights(terms: Mapping[str, float] | Iterable[str]) -> dict[str, float]:
    if isinstance(terms, Mapping):
        return dict(terms)
    return dict(Counter(terms))


def _tf_part(tf: int, dl: int, index: InvertedIndex, params: RetrievalParams) -> float:
    denom = tf + params.k1 * (1.0 - params.b + params.b * dl / index.avg_doc_length)
    return tf * (params.k1 + 1.0) / denom


def bm25_score(
    index: InvertedIndex,
    terms: Mapping[str, float] | Iterable[str],
    doc: int,
    params: RetrievalParams,
) -> float:
    """BM25 score of one document for a (possibly weighted) term multiset."""
    weights = _as_weights(terms)
    counts = index.doc_terms[doc]
    dl = index.doc_lengths[doc]
    score = 0.0
    for term in sorted(weights):
        tf = counts.get(term, 0)
        if tf == 0:
            continue
        score += weights[term] * index.idf(term) * _tf_part(tf, dl, index, params)
    return score


def _score_all(
    index: InvertedIndex, weights: Mapping[str, float], params: RetrievalParams
) -> dict[int, float]:
    """Accumulator scoring over postings; term order matches bm25_score."""
    acc: dict[int, float] = {}
    for term in sorted(weights):
        postings = index.postings.get(term)
        if not postings:
            continue
        w_idf = weights[term] * index.idf(term)
        for ordinal, tf in postings:
            contribution = w_idf * _tf_part(tf, index.doc_lengths[ordinal], index, params)
            acc[ordinal] = acc.get(ordinal, 0.0) + contribution
    return acc


def query_term_counts(query: Query, analyzer: Analyzer) -> Counter[str]:
    """Term counts over the concatenated query text and indicative terms."""
    text = " ".join([query.text, *query.indicative_terms])
    return Counter(analyzer.tokens(text))


def bo1_expand(
    index: InvertedIndex,
    query: Query,
    first_pass: Cluster,
    params: RetrievalParams,
) -> dict[str, float]:
    """Expand the query from its top feedback documents.

    Candidate terms are everything in the top fb_docs documents, weighted
    w(t) = tf_x * log2((1 + P_n)/P_n) + log2(1 + P_n) with P_n = F(t)/N and
    tf_x the term frequency summed over the feedback set. The top fb_terms
    are merged into the original query: each final weight is
    original_count/max_count + w(t)/w_max (either part zero when absent).
    """
    if not first_pass.entries:
        raise ValueError("bo1_expand requires a non-empty first pass")
    original = query_term_counts(query, index.analyzer)

    feedback = first_pass.entries[: params.fb_docs]
    tf_x: Counter[str] = Counter()
    for doc_id, _ in feedback:
        tf_x.update(index.doc_terms[index.ordinal(doc_id)])

    w: dict[str, float] = {}
    for term, freq in tf_x.items():
        p_n = index.collection_tf[term] / index.N
        w[term] = freq * math.log2((1.0 + p_n) / p_n) + math.log2(1.0 + p_n)
    selected = sorted(w, key=lambda t: (-w[t], t))[: params.fb_terms]

    w_max = max(w[t] for t in w)
    max_q = max(original.values()) if original else 1.0
    expanded: dict[str, float] = {}
    for term in original:
        expanded[term] = original[term] / max_q
    for term in selected:
        expanded[term] = expanded.get(term, 0.0) + w[term] / w_max
    return expanded


def retrieve_candidates(
    index: InvertedIndex, query: Query, params: RetrievalParams
) -> Cluster:
    """Two-pass retrieval with duplicate dropping and the stage-1 cut."""
    original = query_term_counts(query, index.analyzer)
    first_scores = _score_all(index, original, params)
    if not first_scores:
        return Cluster(query_id=query.query_id)
    first_entries = _rank_entries(
        (index.docs[i].doc_id, s) for i, s in first_scores.items()
    )
    first_pass = Cluster(query_id=query.query_id, entries=first_entries)

    if params.use_expansion:
        weights = bo1_expand(index, query, first_pass, params)
        scores = _score_all(index, weights, params)
    else:
        scores = first_scores

    ranked = _rank_entries((index.docs[i].doc_id, s) for i, s in scores.items())

    # Drop exact duplicates: keep the best-scored copy, then the earliest.
    best_by_text: dict[str, tuple[float, int, str]] = {}
    for doc_id, score in ranked:
        doc = index.docs[index.ordinal(doc_id)]
        contender = (-score, doc.timestamp, doc_id)
        held = best_by_text.get(doc.text)
        if held is None or contender < held:
            best_by_text[doc.text] = contender
    keep = {doc_id for _, _, doc_id in best_by_text.values()}
    deduped = [(doc_id, score) for doc_id, score in ranked if doc_id in keep]

    return Cluster(query_id=query.query_id, entries=deduped[: params.k_stage1])
