from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factstream import (
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
from conftest import make_doc
from factstream.rerank import QueryProfile


# --- normalize_text ----------------------------------------------------------

def test_normalize_tweet_full_treatment():
    raw = "RT @joe: Fire spreading! \U0001F525 http://t.co/x #CampFire"
    assert normalize_text(raw, SourceType.TWITTER) == "Fire spreading! camp fire"


def test_normalize_empty():
    assert normalize_text("", SourceType.TWITTER) == ""


def test_normalize_news_is_minimal():
    raw = "Evacuations ordered in two counties."
    assert normalize_text(raw, SourceType.NEWS) == raw


def test_normalize_news_strips_urls_only():
    raw = "Read more  at https://example.com/a   #NotAHashtagSplit"
    assert normalize_text(raw, SourceType.NEWS) == "Read more at #NotAHashtagSplit"


def test_normalize_repeated_retweet_prefixes():
    raw = "RT @a: RT @b: evacuations underway"
    assert normalize_text(raw, SourceType.TWITTER) == "evacuations underway"


def test_normalize_removes_mentions_and_emoticons():
    raw = "@mayor stay safe everyone :) #StaySafe"
    assert normalize_text(raw, SourceType.TWITTER) == "stay safe everyone stay safe"


@given(st.text(max_size=200))
@settings(max_examples=300, deadline=None)
def test_normalize_idempotent_twitter(raw):
    once = normalize_text(raw, SourceType.TWITTER)
    assert normalize_text(once, SourceType.TWITTER) == once


@given(st.text(max_size=200))
@settings(max_examples=100, deadline=None)
def test_normalize_idempotent_news(raw):
    once = normalize_text(raw, SourceType.NEWS)
    assert normalize_text(once, SourceType.NEWS) == once


# --- segment_hashtag ---------------------------------------------------------

def test_segment_camel_case():
    assert segment_hashtag("CampFire") == ["camp", "fire"]


def test_segment_whole_word_wins_over_parts():
    # "wildfire" is itself in the bundled list; greedy longest-match keeps it.
    assert segment_hashtag("wildfire") == ["wildfire"]


def test_segment_unsplittable_residue():
    assert segment_hashtag("xqzv") == ["xqzv"]


def test_segment_mixed_word_and_residue():
    assert segment_hashtag("qjxfire") == ["qjx", "fire"]


def test_segment_digits_split_from_words():
    assert segment_hashtag("Storm2024") == ["storm", "2024"]


def test_segment_empty():
    assert segment_hashtag("") == []


@given(st.text(max_size=40))
@settings(max_examples=300, deadline=None)
def test_segment_concatenates_to_lowercase_input(tag):
    assert "".join(segment_hashtag(tag)) == tag.lower()


# --- assign_period -----------------------------------------------------------

DAY = 86_400


def timeline(n_days: int, start: int = 1_700_000_000) -> EventTimeline:
    return EventTimeline(
        event_id="e1",
        periods=[Period(start + i * DAY, start + (i + 1) * DAY) for i in range(n_days)],
    )


def test_assign_period_inclusive_start():
    tl = timeline(4)
    doc = make_doc("d", "x", timestamp=tl.periods[2].start)
    assert assign_period(doc, tl) == 2


def test_assign_period_exclusive_end_rolls_to_next():
    tl = timeline(4)
    doc = make_doc("d", "x", timestamp=tl.periods[2].end)
    assert assign_period(doc, tl) == 3


def test_assign_period_exclusive_end_with_gap():
    tl = EventTimeline(
        event_id="e1",
        periods=[Period(0, 100), Period(100, 200), Period(300, 400)],
    )
    doc = make_doc("d", "x", timestamp=200)
    assert assign_period(doc, tl) is None


def test_assign_period_before_first():
    tl = timeline(2)
    doc = make_doc("d", "x", timestamp=tl.periods[0].start - 1)
    assert assign_period(doc, tl) is None


@given(
    st.lists(st.integers(min_value=1, max_value=50), min_size=1, max_size=8),
    st.integers(min_value=0, max_value=600),
)
@settings(max_examples=200, deadline=None)
def test_assign_period_unique(gaps_and_lengths, ts):
    # Build a gapped timeline from alternating gap/length increments.
    periods = []
    cursor = 1
    for i, step in enumerate(gaps_and_lengths):
        if i % 2 == 0:
            periods.append(Period(cursor, cursor + step))
        cursor += step
    tl = EventTimeline(event_id="e", periods=periods)
    doc = make_doc("d", "x", timestamp=ts)
    got = assign_period(doc, tl)
    containing = [i for i, p in enumerate(periods) if p.start <= ts < p.end]
    assert len(containing) <= 1
    assert got == (containing[0] if containing else None)


def test_timeline_rejects_overlap():
    with pytest.raises(ValueError):
        EventTimeline(event_id="e", periods=[Period(0, 10), Period(5, 20)])


def test_query_requires_indicative_terms():
    with pytest.raises(ValueError):
        Query("q", "text", [], QueryProfile(keywords=frozenset({"x"})))


# --- wire formats ------------------------------------------------------------

def test_load_corpus_normalizes_and_checks(tmp_path):
    lines = [
        {"doc_id": "t1", "event_id": "e1", "source_type": "twitter",
         "unix_timestamp": 100, "text": "RT @a: fire #CampFire"},
        {"doc_id": "n1", "event_id": "e1", "source_type": "news",
         "unix_timestamp": 200, "text": "Fire is growing."},
    ]
    path = tmp_path / "corpus.jsonl"
    path.write_text("\n".join(json.dumps(l) for l in lines))
    docs = load_corpus(path)
    assert docs[0].text == "fire camp fire"
    assert docs[0].source_type is SourceType.TWITTER
    assert docs[1].text == "Fire is growing."


def test_load_corpus_rejects_duplicate_ids(tmp_path):
    line = {"doc_id": "t1", "event_id": "e1", "source_type": "news",
            "unix_timestamp": 100, "text": "x"}
    path = tmp_path / "corpus.jsonl"
    path.write_text(json.dumps(line) + "\n" + json.dumps(line))
    with pytest.raises(ValueError, match="duplicate doc_id"):
        load_corpus(path)


def test_load_corpus_rejects_bad_source(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text(json.dumps({"doc_id": "a", "event_id": "e", "source_type": "fax",
                                "unix_timestamp": 1, "text": "x"}))
    with pytest.raises(ValueError):
        load_corpus(path)


def test_load_timeline_and_queries(tmp_path):
    (tmp_path / "timeline.json").write_text(json.dumps(
        {"event_id": "e1", "periods": [{"start": 0, "end": 100}]}
    ))
    tl = load_timeline(tmp_path / "timeline.json")
    assert len(tl) == 1 and tl.event_id == "e1"

    (tmp_path / "queries.json").write_text(json.dumps({
        "event_id": "e1",
        "queries": [
            {"query_id": "q1", "text": "missing people", "indicative_terms": ["missing"],
             "entity_types": ["NUMBER", "LOCATION"], "keywords": ["missing"]},
            {"query_id": "q2", "text": "damage", "indicative_terms": ["damage", "burned"]},
        ],
    }))
    event_id, queries = load_queries(tmp_path / "queries.json")
    assert event_id == "e1"
    assert queries[0].profile.expected_entity_types == {"NUMBER", "LOCATION"}
    # No explicit profile: indicative terms become keywords.
    assert queries[1].profile.keywords == {"damage", "burned"}


def test_load_queries_rejects_unknown_entity_type(tmp_path):
    (tmp_path / "queries.json").write_text(json.dumps({
        "event_id": "e1",
        "queries": [{"query_id": "q1", "text": "x", "indicative_terms": ["x"],
                     "entity_types": ["GADGET"]}],
    }))
    with pytest.raises(ValueError):
        load_queries(tmp_path / "queries.json")
