"""Batch orchestration: slice, retrieve, rerank, select, score, emit.

Each event-day is processed independently through the three stages, except
that days within one event must run in temporal order so that earlier
summaries can penalize later repeats. Everything is deterministic for fixed
inputs and configuration: ties are broken on ids throughout, so repeated
runs emit byte-identical run files.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Optional

from .analyzer import Analyzer
from .corpus import assign_period, load_corpus, load_query_sets, load_timelines
from .mmr import MmrParams, RelevanceRecord, SummaryState, TfidfModel, mmr_rank, update_past
from .rerank import (
    RerankParams,
    Tagger,
    boe_score,
    inject_external_scores,
    load_scores,
    make_tagger,
    select_top,
)
from .retrieve import Cluster, RetrievalParams, _rank_entries, build_index, retrieve_candidates
from .select import EXACT_POOL_CAP, IlpProblem, extract_concepts, solve_exact, solve_greedy

logger = logging.getLogger(__name__)

MAX_SUMMARY_DOCS = 150  # selection budget L


@dataclass
class PipelineConfig:
    corpus_path: str
    queries_path: str
    timeline_path: str
    out_path: str = "run.jsonl"
    scores_path: Optional[str] = None
    reranker: str = "boe"
    solver: str = "auto"
    tagger: str = "rules"
    retrieval: RetrievalParams = field(default_factory=RetrievalParams)
    rerank: RerankParams = field(default_factory=RerankParams)
    max_docs: int = MAX_SUMMARY_DOCS
    mmr: MmrParams = field(default_factory=MmrParams)
    exact_cap: int = EXACT_POOL_CAP
    dump_candidates: Optional[str] = None
    dump_ilp: Optional[str] = None

    def __post_init__(self) -> None:
        if self.reranker not in ("boe", "external"):
            raise ValueError(f"unknown reranker {self.reranker!r}")
        if self.solver not in ("exact", "greedy", "auto"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.max_docs < 1:
            raise ValueError("max_docs must be >= 1")
        if self.rerank.k_stage2 > self.retrieval.k_stage1:
            raise ValueError("k_stage2 cannot exceed k_stage1")
        if self.reranker == "external" and not self.scores_path:
            raise ValueError("reranker=external requires a scores file")
        for label, p in (("corpus", self.corpus_path), ("queries", self.queries_path),
                         ("timeline", self.timeline_path), ("scores", self.scores_path)):
            if p is not None and not Path(p).exists():
                raise ValueError(f"{label} file not found: {p}")


def load_config(path: str | Path) -> PipelineConfig:
    """Read a JSON config; relative paths resolve against the config file."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    base = path.parent

    def resolve(p: Optional[str]) -> Optional[str]:
        return str(base / p) if p else None

    paths = obj.get("paths", {})
    params = obj.get("params", {})
    retrieval = RetrievalParams(
        k1=params.get("k1", RetrievalParams.k1),
        b=params.get("b", RetrievalParams.b),
        k_stage1=params.get("stage1_candidates", RetrievalParams.k_stage1),
        fb_docs=params.get("fb_docs", RetrievalParams.fb_docs),
        fb_terms=params.get("fb_terms", RetrievalParams.fb_terms),
        use_expansion=params.get("use_expansion", RetrievalParams.use_expansion),
    )
    return PipelineConfig(
        corpus_path=resolve(paths["corpus"]),
        queries_path=resolve(paths["queries"]),
        timeline_path=resolve(paths["timeline"]),
        out_path=resolve(paths.get("output")) or str(base / "run.jsonl"),
        scores_path=resolve(paths.get("scores")),
        reranker=obj.get("reranker", "boe"),
        solver=obj.get("solver", "auto"),
        tagger=obj.get("tagger", "rules"),
        retrieval=retrieval,
        rerank=RerankParams(k_stage2=params.get("stage2_candidates", RerankParams.k_stage2)),
        max_docs=params.get("max_docs", MAX_SUMMARY_DOCS),
        mmr=MmrParams(lambda_=params.get("lambda", MmrParams.lambda_)),
        exact_cap=obj.get("exact_cap", EXACT_POOL_CAP),
    )


@dataclass(frozen=True)
class RunRecord:
    event_id: str
    day: int
    doc_id: str
    importance: float
    rank: int


def emit_runfile(records: list[RunRecord], out: IO[str]) -> None:
    """One JSON object per record, rank 1-based in pick order."""
    for r in records:
        out.write(
            json.dumps(
                {
                    "event_id": r.event_id,
                    "day": r.day,
                    "doc_id": r.doc_id,
                    "importance": r.importance,
                    "rank": r.rank,
                },
                ensure_ascii=False,
            )
            + "\n"
        )


def load_runfile(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad run record: {exc}") from exc
    return records


class _CachingTagger:
    """Memoizes mentions per doc_id; tagging is pure so this is safe."""

    def __init__(self, inner: Tagger) -> None:
        self.inner = inner
        self._cache: dict[str, list] = {}

    def tag(self, text: str, doc_id: Optional[str] = None):
        if doc_id is None:
            return self.inner.tag(text)
        if doc_id not in self._cache:
            self._cache[doc_id] = self.inner.tag(text, doc_id=doc_id)
        return self._cache[doc_id]


class Pipeline:
    """Loaded inputs plus per-event scoring state."""

    def __init__(self, config: PipelineConfig) -> None:
        self.config = config
        self.analyzer = Analyzer()
        self.docs = load_corpus(config.corpus_path)
        self.timelines = load_timelines(config.timeline_path)
        self.query_sets = load_query_sets(config.queries_path)
        self.scores = load_scores(config.scores_path) if config.scores_path else None
        self.tagger = _CachingTagger(make_tagger(config.tagger))
        self._states: dict[str, SummaryState] = {}
        self._next_day: dict[str, int] = {}
        self._candidate_rows: list[dict] = []
        self._ilp_rows: list[dict] = []

    def events(self) -> list[str]:
        shared = set(self.timelines) & set(self.query_sets)
        return sorted(shared)

    def run(self, event_filter: Optional[str] = None) -> list[RunRecord]:
        events = self.events()
        if event_filter is not None:
            if event_filter not in events:
                raise ValueError(f"event {event_filter!r} has no queries/timeline")
            events = [event_filter]
        records: list[RunRecord] = []
        for event_id in events:
            for day in range(len(self.timelines[event_id])):
                records.extend(self.run_event_day(event_id, day))
        self._write_dumps()
        return records

    def run_event_day(self, event_id: str, day: int) -> list[RunRecord]:
        expected = self._next_day.get(event_id, 0)
        if day != expected:
            raise ValueError(
                f"event {event_id!r}: day {day} requires days 0..{expected - 1} first"
            )
        self._next_day[event_id] = day + 1
        state = self._states.setdefault(event_id, SummaryState())

        timeline = self.timelines[event_id]
        queries = self.query_sets[event_id]
        slice_docs = sorted(
            (
                d
                for d in self.docs
                if d.event_id == event_id and assign_period(d, timeline) == day
            ),
            key=lambda d: (d.timestamp, d.doc_id),
        )
        if not slice_docs:
            logger.warning("event %s day %d: empty document slice", event_id, day)
            return []

        index = build_index(slice_docs, self.analyzer)
        texts = {d.doc_id: d.text for d in slice_docs}

        clusters: dict[str, Cluster] = {}
        for query in queries:
            stage1 = retrieve_candidates(index, query, self.config.retrieval)
            if self.config.dump_candidates:
                for doc_id, score in stage1.entries:
                    self._candidate_rows.append(
                        {
                            "event_id": event_id,
                            "day": day,
                            "query_id": query.query_id,
                            "doc_id": doc_id,
                            "text": texts[doc_id],
                            "bm25_score": score,
                        }
                    )
            if self.config.reranker == "external":
                assert self.scores is not None
                reranked = inject_external_scores(stage1, self.scores)
            else:
                rescored = [
                    (
                        doc_id,
                        boe_score(
                            self.tagger.tag(texts[doc_id], doc_id=doc_id),
                            texts[doc_id],
                            query.profile,
                        ),
                    )
                    for doc_id, _ in stage1.entries
                ]
                reranked = Cluster(query.query_id, _rank_entries(rescored))
            kept = select_top(reranked, self.config.rerank)
            clusters[query.query_id] = kept
            logger.info(
                "event %s day %d query %s: stage1=%d stage2=%d",
                event_id, day, query.query_id, len(stage1.entries), len(kept.entries),
            )

        pool: list[str] = []
        seen_ids: set[str] = set()
        seen_texts: set[str] = set()
        for query in queries:
            for doc_id, _ in clusters[query.query_id].entries:
                if doc_id in seen_ids or texts[doc_id] in seen_texts:
                    continue
                seen_ids.add(doc_id)
                seen_texts.add(texts[doc_id])
                pool.append(doc_id)
        if not pool:
            logger.warning("event %s day %d: no candidates survived", event_id, day)
            return []

        records_by_doc = {
            doc_id: RelevanceRecord(
                doc_id=doc_id,
                per_query_scores={
                    q.query_id: score
                    for q in queries
                    for d, score in clusters[q.query_id].entries
                    if d == doc_id
                },
            )
            for doc_id in pool
        }

        table = extract_concepts([(d, texts[d]) for d in pool], self.tagger)
        problem = IlpProblem(concept_table=table, max_docs=self.config.max_docs, pool=pool)
        if self.config.dump_ilp:
            self._ilp_rows.append(_ilp_instance_json(event_id, day, problem))
        use_exact = self.config.solver == "exact" or (
            self.config.solver == "auto" and len(pool) <= self.config.exact_cap
        )
        if use_exact:
            selection = solve_exact(problem, cap=self.config.exact_cap)
        else:
            selection = solve_greedy(problem)
        logger.info(
            "event %s day %d: pool=%d concepts=%d selected=%d objective=%.3f",
            event_id, day, len(pool), len(table.concepts), len(selection.chosen),
            selection.objective,
        )

        state.tfidf_model = TfidfModel((texts[d] for d in pool), self.analyzer)
        ranked = mmr_rank(selection, records_by_doc, texts, state, self.config.mmr)
        update_past(state, [(doc_id, texts[doc_id]) for doc_id, _ in ranked])

        return [
            RunRecord(event_id=event_id, day=day, doc_id=doc_id, importance=score, rank=i)
            for i, (doc_id, score) in enumerate(ranked, start=1)
        ]

    def _write_dumps(self) -> None:
        if self.config.dump_candidates:
            with open(self.config.dump_candidates, "w", encoding="utf-8") as fh:
                for row in self._candidate_rows:
                    fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        if self.config.dump_ilp:
            with open(self.config.dump_ilp, "w", encoding="utf-8") as fh:
                for row in self._ilp_rows:
                    fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def _ilp_instance_json(event_id: str, day: int, problem: IlpProblem) -> dict:
    return {
        "event_id": event_id,
        "day": day,
        "max_docs": problem.max_docs,
        "pool": problem.pool,
        "concepts": [
            {
                "surface": key[0],
                "etype": key[1].value,
                "weight": weight,
                "docs": sorted(docs),
            }
            for (key, weight), docs in zip(
                problem.concept_table.concepts, problem.concept_table.occurrence
            )
        ],
    }


def run(config: PipelineConfig, event_filter: Optional[str] = None) -> list[RunRecord]:
    """Run the full pipeline and write the run file."""
    pipeline = Pipeline(config)
    records = pipeline.run(event_filter)
    with open(config.out_path, "w", encoding="utf-8") as fh:
        emit_runfile(records, fh)
    logger.info("wrote %d records to %s", len(records), config.out_path)
    return records
