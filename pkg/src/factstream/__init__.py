"""Temporal multi-query fact extraction over crisis event streams.

The pipeline retrieves per-query candidates from each event-day slice
(BM25 + feedback expansion), rescores them (bag-of-entities or injected
external scores), selects a diverse subset by concept coverage and emits
importance-ranked records after a relaxed-MMR pass that also penalizes
redundancy against past days. Matching-based evaluation lives alongside.
"""

from .analyzer import Analyzer
from .corpus import (
    Document,
    EventTimeline,
    Period,
    Query,
    SourceType,
    assign_period,
    load_corpus,
    load_queries,
    load_timeline,
    normalize_text,
    segment_hashtag,
)
from .evaluate import (
    EvalConfig,
    FactList,
    MatchSet,
    comprehensiveness,
    evaluate_run,
    macro_average,
    redundancy_ratio,
)
from .mmr import (
    MmrParams,
    RelevanceRecord,
    SummaryState,
    TfidfModel,
    mmr_rank,
    relevance,
    tfidf_redundancy,
    update_past,
)
from .pipeline import Pipeline, PipelineConfig, RunRecord, emit_runfile, load_config, run
from .rerank import (
    EntityMention,
    EntityType,
    QueryProfile,
    RerankParams,
    boe_score,
    inject_external_scores,
    select_top,
    tag_entities,
)
from .retrieve import (
    Cluster,
    InvertedIndex,
    RetrievalParams,
    bm25_score,
    bo1_expand,
    build_index,
    retrieve_candidates,
)
from .select import (
    ConceptTable,
    IlpProblem,
    Selection,
    extract_concepts,
    solve_exact,
    solve_greedy,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
