"""Matching-based evaluation: comprehensiveness, redundancy ratio, trends.

A run's items for one event-day are cut to the top k by importance rank and
matched against a gain-weighted fact list. Comprehensiveness is the gain
share of facts matched at least once; the redundancy ratio divides matched
gain by match-count-weighted gain, so 1.0 means no fact was matched twice.
Values are macro-averaged across days within an event and then across
events. Days with no matches at all have an undefined redundancy ratio and
are excluded from averaging rather than imputed.

Matching normally comes from human judgments supplied as a file. The
`oracle_match` helper used by synthetic end-to-end tests is a plain
substring matcher over planted fact strings; it is NOT a faithful stand-in
for assessor matching and must not be used to report real results.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Mapping, Optional, Sequence, Union

logger = logging.getLogger(__name__)

EventDay = tuple[str, int]


@dataclass
class FactList:
    """Reference facts with positive gains; fact_ids unique."""

    facts: list[tuple[str, float]]

    def __post_init__(self) -> None:
        ids = [fact_id for fact_id, _ in self.facts]
        if len(set(ids)) != len(ids):
            raise ValueError("fact_ids must be unique")
        for fact_id, gain in self.facts:
            if gain <= 0:
                raise ValueError(f"fact {fact_id!r}: gain must be > 0")

    def gains(self) -> dict[str, float]:
        return dict(self.facts)


@dataclass
class MatchSet:
    """fact_id -> summary item ids matching it (within the evaluated prefix)."""

    matches: dict[str, set[str]]

    def restricted(self, allowed_items: set[str]) -> "MatchSet":
        return MatchSet(
            matches={f: items & allowed_items for f, items in self.matches.items()}
        )


@dataclass(frozen=True)
class EvalConfig:
    rank_cutoff_k: int

    def __post_init__(self) -> None:
        if self.rank_cutoff_k < 1:
            raise ValueError("rank cutoff must be >= 1")


def _check_facts(facts: FactList, matches: MatchSet) -> dict[str, float]:
    gains = facts.gains()
    unknown = set(matches.matches) - set(gains)
    if unknown:
        raise ValueError(f"matches reference unknown facts: {sorted(unknown)}")
    return gains


def comprehensiveness(facts: FactList, matches: MatchSet) -> float:
    """Gain share of facts matched at least once, in [0, 1]."""
    gains = _check_facts(facts, matches)
    if not gains:
        raise ValueError("fact list must be non-empty")
    total = sum(gains[f] for f in sorted(gains))
    matched = sum(gains[f] for f in sorted(gains) if matches.matches.get(f))
    return matched / total


def redundancy_ratio(facts: FactList, matches: MatchSet) -> Optional[float]:
    """Matched gain over match-count-weighted gain; None when nothing matched."""
    gains = _check_facts(facts, matches)
    numerator = sum(gains[f] for f in sorted(gains) if matches.matches.get(f))
    denominator = sum(
        gains[f] * len(matches.matches.get(f, ())) for f in sorted(gains)
    )
    if denominator == 0:
        return None
    return numerator / denominator


def macro_average(
    per_day: Mapping[EventDay, Optional[float]],
) -> tuple[dict[str, Optional[float]], Optional[float]]:
    """Mean over defined days per event, then mean over defined events."""
    by_event: dict[str, list[float]] = {}
    for (event_id, _day), value in sorted(per_day.items()):
        by_event.setdefault(event_id, [])
        if value is not None:
            by_event[event_id].append(value)
    per_event: dict[str, Optional[float]] = {}
    for event_id, values in by_event.items():
        if values:
            per_event[event_id] = sum(values) / len(values)
        else:
            per_event[event_id] = None
            logger.warning("event %s: all days undefined; excluded from the overall mean", event_id)
    defined = [v for _, v in sorted(per_event.items()) if v is not None]
    overall = sum(defined) / len(defined) if defined else None
    return per_event, overall


def trend_series(per_day: Mapping[EventDay, float], out: IO[str]) -> None:
    """Write per-day comprehensiveness as CSV rows (event, day_index, value)."""
    writer = csv.writer(out)
    writer.writerow(["event", "day_index", "value"])
    for (event_id, day), value in sorted(per_day.items()):
        writer.writerow([event_id, day, value])


# --- run evaluation ----------------------------------------------------------

def evaluate_run(
    run_records: Iterable[Mapping],
    facts_by_day: Mapping[EventDay, FactList],
    matches_by_day: Mapping[EventDay, MatchSet],
    config: EvalConfig,
) -> dict:
    """Metrics for a run file cut at the configured rank."""
    prefix_items: dict[EventDay, set[str]] = {}
    for rec in run_records:
        key = (str(rec["event_id"]), int(rec["day"]))
        if int(rec["rank"]) <= config.rank_cutoff_k:
            prefix_items.setdefault(key, set()).add(str(rec["doc_id"]))

    comp: dict[EventDay, Optional[float]] = {}
    red: dict[EventDay, Optional[float]] = {}
    for key in sorted(facts_by_day):
        facts = facts_by_day[key]
        matches = matches_by_day.get(key, MatchSet(matches={}))
        matches = matches.restricted(prefix_items.get(key, set()))
        comp[key] = comprehensiveness(facts, matches)
        red[key] = redundancy_ratio(facts, matches)

    comp_events, comp_overall = macro_average(comp)
    red_events, red_overall = macro_average(red)
    return {
        "rank_cutoff_k": config.rank_cutoff_k,
        "per_day": [
            {
                "event_id": event_id,
                "day": day,
                "comprehensiveness": comp[(event_id, day)],
                "redundancy_ratio": red[(event_id, day)],
            }
            for event_id, day in sorted(comp)
        ],
        "per_event": [
            {
                "event_id": event_id,
                "comprehensiveness": comp_events[event_id],
                "redundancy_ratio": red_events.get(event_id),
            }
            for event_id in sorted(comp_events)
        ],
        "overall": {
            "comprehensiveness": comp_overall,
            "redundancy_ratio": red_overall,
        },
    }


def oracle_match(
    fact_needles: Mapping[str, str], summary_items: Mapping[str, str]
) -> MatchSet:
    """Case-insensitive substring matcher over planted fact strings.

    Synthetic-test helper only: real matching is a human judgment and a
    substring check is not a faithful substitute.
    """
    matches: dict[str, set[str]] = {}
    for fact_id, needle in fact_needles.items():
        needle_l = needle.lower()
        matches[fact_id] = {
            item_id for item_id, text in summary_items.items() if needle_l in text.lower()
        }
    return MatchSet(matches=matches)


# --- wire formats ------------------------------------------------------------

def _as_objects(payload) -> list[dict]:
    return payload if isinstance(payload, list) else [payload]


def load_facts(path: Union[str, Path]) -> dict[EventDay, FactList]:
    """facts.json: {"event_id", "day", "facts": [{"fact_id", "gain"}]} or a list thereof."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    out: dict[EventDay, FactList] = {}
    for obj in _as_objects(payload):
        key = (str(obj["event_id"]), int(obj["day"]))
        if key in out:
            raise ValueError(f"{path}: duplicate facts for {key}")
        out[key] = FactList(
            facts=[(str(f["fact_id"]), float(f["gain"])) for f in obj["facts"]]
        )
    return out


def load_matches(path: Union[str, Path]) -> dict[EventDay, MatchSet]:
    """matches.json: {"event_id", "day", "matches": {fact_id: [item_id]}} or a list thereof."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    out: dict[EventDay, MatchSet] = {}
    for obj in _as_objects(payload):
        key = (str(obj["event_id"]), int(obj["day"]))
        if key in out:
            raise ValueError(f"{path}: duplicate matches for {key}")
        out[key] = MatchSet(
            matches={str(f): {str(i) for i in items} for f, items in obj["matches"].items()}
        )
    return out
