"""Command line front end: run the pipeline, evaluate a run, export trends.

Exit code 0 on success; contract violations (missing files, bad schemas,
missing external scores) print a diagnostic and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from .evaluate import EvalConfig, evaluate_run, load_facts, load_matches, trend_series
from .mmr import MmrParams
from .pipeline import MAX_SUMMARY_DOCS, load_config, run
from .rerank import RerankParams
from .retrieve import RetrievalParams


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="factstream",
        description="Temporal multi-query fact extraction over crisis event streams.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-stage progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run retrieve/rerank/summarize for every event-day")
    p_run.add_argument("--config", required=True, help="JSON pipeline config")
    p_run.add_argument("--event", help="process only this event id")
    p_run.add_argument("--reranker", choices=["boe", "external"],
                       help="cluster scorer (default: boe)")
    p_run.add_argument("--lambda", dest="lambda_", type=float, metavar="F",
                       help=f"MMR relevance/redundancy trade-off (default: {MmrParams.lambda_})")
    p_run.add_argument("--max-docs", type=int, metavar="N",
                       help=f"selection budget per event-day (default: {MAX_SUMMARY_DOCS})")
    p_run.add_argument("--stage1-candidates", type=int, metavar="N",
                       help=f"retrieval depth per query (default: {RetrievalParams.k_stage1})")
    p_run.add_argument("--stage2-candidates", type=int, metavar="N",
                       help=f"reranked depth per query (default: {RerankParams.k_stage2})")
    p_run.add_argument("--out", help="run file path (default: from config)")
    p_run.add_argument("--dump-candidates", metavar="PATH",
                       help="also write stage-1 candidates as JSONL (score-injection boundary)")
    p_run.add_argument("--dump-ilp", metavar="PATH",
                       help="also write the selection instances as JSONL")

    p_eval = sub.add_parser("evaluate", help="score a run file against facts and matches")
    p_eval.add_argument("--run", required=True, help="run file (JSONL)")
    p_eval.add_argument("--facts", required=True, help="facts.json")
    p_eval.add_argument("--matches", required=True, help="matches.json")
    p_eval.add_argument("--cutoff", required=True, type=int, metavar="K",
                        help="rank cut-off forming the evaluated summary")
    p_eval.add_argument("-o", "--out", default="metrics.json", help="metrics output path")

    p_trend = sub.add_parser("trend", help="per-day comprehensiveness series as CSV")
    p_trend.add_argument("--metrics", required=True, help="metrics.json from `evaluate`")
    p_trend.add_argument("-o", "--out", required=True, help="CSV output path")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.reranker:
        config = replace(config, reranker=args.reranker)
    if args.lambda_ is not None:
        config = replace(config, mmr=MmrParams(lambda_=args.lambda_))
    if args.max_docs is not None:
        config = replace(config, max_docs=args.max_docs)
    if args.stage1_candidates is not None:
        config = replace(config, retrieval=replace(config.retrieval, k_stage1=args.stage1_candidates))
    if args.stage2_candidates is not None:
        config = replace(config, rerank=RerankParams(k_stage2=args.stage2_candidates))
    if args.out:
        config = replace(config, out_path=args.out)
    if args.dump_candidates:
        config = replace(config, dump_candidates=args.dump_candidates)
    if args.dump_ilp:
        config = replace(config, dump_ilp=args.dump_ilp)
    config.__post_init__()  # re-validate after overrides
    records = run(config, event_filter=args.event)
    print(f"wrote {len(records)} records to {config.out_path}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    from .pipeline import load_runfile

    metrics = evaluate_run(
        load_runfile(args.run),
        load_facts(args.facts),
        load_matches(args.matches),
        EvalConfig(rank_cutoff_k=args.cutoff),
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2)
        fh.write("\n")
    overall = metrics["overall"]
    print(f"comprehensiveness={overall['comprehensiveness']} "
          f"redundancy_ratio={overall['redundancy_ratio']} -> {args.out}")
    return 0


def _cmd_trend(args: argparse.Namespace) -> int:
    with open(args.metrics, encoding="utf-8") as fh:
        metrics = json.load(fh)
    per_day = {
        (row["event_id"], int(row["day"])): row["comprehensiveness"]
        for row in metrics.get("per_day", [])
        if row.get("comprehensiveness") is not None
    }
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        trend_series(per_day, fh)
    print(f"wrote {len(per_day)} rows to {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        if args.command == "trend":
            return _cmd_trend(args)
        raise AssertionError(args.command)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
