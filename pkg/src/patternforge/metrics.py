"""Ranking metrics: micro average precision, recall@1, pattern accuracy.

muAP walks the globally score-sorted prediction list (one top-1 row per
query) and accumulates precision at every correct row, divided by the
number of true queries. Distractor rows occupy ranks but never count as
correct and never enter the denominator.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path


class MetricInputError(ValueError):
    pass


def micro_average_precision(preds: list, gt: dict) -> float:
    """preds: (query_id, gallery_id, score) rows, at most one per query.
    gt: query_id -> source_id over true queries only."""
    if not gt:
        raise MetricInputError("ground truth is empty")
    seen = set()
    for qid, _gid, score in preds:
        if qid in seen:
            raise MetricInputError(f"duplicate prediction row for query {qid!r}")
        seen.add(qid)
        if not (score == score and abs(score) != float("inf")):
            raise MetricInputError(f"non-finite score for query {qid!r}")
    rows = sorted(preds, key=lambda r: (-r[2], r[0], r[1]))
    total = 0.0
    correct = 0
    for rank, (qid, gid, _score) in enumerate(rows, start=1):
        if gt.get(qid) == gid:
            correct += 1
            total += correct / rank
    return total / len(gt)


def recall_at_1(matches, gt: dict) -> float:
    """Fraction of true queries whose rank-1 gallery id is correct.
    True queries absent from the matches count as misses."""
    if not gt:
        raise MetricInputError("ground truth is empty")
    top1 = matches.top1()
    hits = sum(1 for qid, sid in gt.items()
               if qid in top1 and top1[qid][0] == sid)
    return hits / len(gt)


def pattern_accuracy(assignment: dict, query_patterns: dict, pool_patterns: dict) -> float:
    """Mean over queries of |P_q intersect P_s| / |P_q|, using each
    query's first assigned pair. Pairs named self:<qid> score 1 by
    construction (their replica is the query itself)."""
    qids = [q for q in assignment if q in query_patterns]
    if not qids:
        raise MetricInputError("no queries overlap between assignment and pattern ground truth")
    total = 0.0
    for qid in qids:
        pairs = assignment[qid]
        if not pairs:
            raise MetricInputError(f"query {qid!r} has no assigned pair")
        pq = set(query_patterns[qid])
        if not pq:
            raise MetricInputError(f"query {qid!r} has an empty pattern set")
        first = pairs[0]
        if first == f"self:{qid}":
            total += 1.0
            continue
        if first not in pool_patterns:
            raise MetricInputError(f"assigned pair {first!r} not in the pool")
        total += len(pq & set(pool_patterns[first])) / len(pq)
    return total / len(qids)


@dataclass
class EvalReport:
    mu_ap: float
    recall_at_1: float
    pattern_acc: float | None = None
    counts: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "mu_ap": round(self.mu_ap, 6),
            "recall_at_1": round(self.recall_at_1, 6),
            "counts": self.counts,
            "config": self.config,
        }
        if self.pattern_acc is not None:
            d["pattern_acc"] = round(self.pattern_acc, 6)
        return d

    def save(self, path: str | os.PathLike) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def build_report(matches, gt: dict, gallery_size: int,
                 assignment: dict | None = None,
                 query_patterns: dict | None = None,
                 pool_patterns: dict | None = None,
                 config: dict | None = None) -> EvalReport:
    """Assemble muAP + recall@1 (+ optional pattern accuracy) from a match
    list's top-1 rows."""
    missing = [q for q in gt if q not in matches.matches]
    if missing and len(missing) == len(gt):
        raise MetricInputError(f"no true query appears in the matches "
                               f"(first missing: {missing[:5]})")
    preds = [(qid, lst[0][0], lst[0][1]) for qid, lst in matches.matches.items() if lst]
    acc = None
    if assignment is not None:
        if query_patterns is None or pool_patterns is None:
            raise MetricInputError("pattern accuracy needs query and pool pattern sets")
        acc = pattern_accuracy(assignment, query_patterns, pool_patterns)
    return EvalReport(
        mu_ap=micro_average_precision(preds, gt),
        recall_at_1=recall_at_1(matches, gt),
        pattern_acc=acc,
        counts={
            "queries": len(matches.matches),
            "true_queries": len(gt),
            "gallery": gallery_size,
        },
        config=config or {},
    )
