"""Prompt selection: picking image-replica pairs from the pool for each query.

Modes mirror the evaluation protocol's selection strategies: seeded random
draw, pattern-feature retrieval, ground-truth key match, deliberately wrong
pairs (lower bound), the query/original synthetic pair (upper bound), and
zero-shot (no prompt; callers duplicate the target as its own prompt).
"""

from __future__ import annotations

import os

import numpy as np

from .forge import combo_key
from .manifest import read_jsonl, write_jsonl
from .rng import derive_seed, make_rng

MODES = ("random", "feature", "ground_truth", "wrong", "self_upper", "zero_shot")


class SelectionConfigError(ValueError):
    """Missing inputs for the requested mode."""


class SelectionError(ValueError):
    """No valid pair exists for a query under the requested mode."""


def self_pair_id(query_id: str) -> str:
    """Synthetic pair id used by the upper-bound mode."""
    return f"self:{query_id}"


def _query_pattern_sets(query_records):
    return {r["id"]: frozenset(c["pattern_id"] for c in r["combo"]) for r in query_records}


def pool_pattern_sets(pool_entries):
    return {e["pair_id"]: frozenset(e["combo_key"].split("+")) for e in pool_entries}


def select_prompts(mode: str, query_records: list, pool_entries: list, n: int = 1,
                   seed: int = 0, query_pattern_features=None,
                   pool_pattern_features=None, gt: dict | None = None) -> dict:
    """Assign up to `n` pool pair ids to every query. Returns
    {query_id: [pair_id, ...]}.

    The ground-truth-dependent modes (ground_truth, wrong, self_upper)
    need `gt` (query_id -> source_id, true queries only); distractor
    queries fall back to the empty zero-shot assignment there, since the
    pool only covers combo keys realized by true queries.
    """
    if mode not in MODES:
        raise SelectionConfigError(f"unknown selection mode {mode!r}")
    if n < 1 and mode != "zero_shot":
        raise SelectionConfigError("n must be >= 1")
    qids = [r["id"] for r in query_records]

    if mode == "zero_shot":
        return {qid: [] for qid in qids}

    if mode in ("ground_truth", "wrong", "self_upper") and gt is None:
        raise SelectionConfigError(f"{mode} mode needs the evaluation ground truth")

    if mode == "self_upper":
        return {qid: [self_pair_id(qid)] if qid in gt else [] for qid in qids}

    if mode == "feature":
        if query_pattern_features is None or pool_pattern_features is None:
            raise SelectionConfigError("feature mode needs query and pool pattern features")
        qf, pf = query_pattern_features, pool_pattern_features
        if qf.dim != pf.dim:
            raise SelectionConfigError(f"pattern feature dims differ: {qf.dim} vs {pf.dim}")
        missing = set(qids) - set(qf.ids)
        if missing:
            raise SelectionConfigError(f"pattern features missing for queries {sorted(missing)[:5]}")
        pool_ids = np.array(pf.ids)
        order = np.argsort(pool_ids, kind="stable")
        sims = qf.vectors.astype(np.float64) @ pf.vectors.astype(np.float64).T
        qrow = {qid: i for i, qid in enumerate(qf.ids)}
        out = {}
        for qid in qids:
            row = sims[qrow[qid]][order]
            top = np.argsort(-row, kind="stable")[: min(n, len(pool_ids))]
            out[qid] = [str(pool_ids[order[t]]) for t in top]
        return out

    # the remaining modes need the queries' pattern ground truth
    qsets = _query_pattern_sets(query_records)
    psets = pool_pattern_sets(pool_entries)
    if not pool_entries:
        raise SelectionConfigError(f"{mode} mode needs a non-empty pool")
    pair_ids = sorted(psets)

    out = {}
    for qid in qids:
        rng = make_rng(derive_seed(seed, qid, 0))
        if mode == "random":
            k = min(n, len(pair_ids))
            picks = rng.choice(len(pair_ids), size=k, replace=False)
            out[qid] = [pair_ids[int(i)] for i in picks]
            continue
        if qid not in gt:
            out[qid] = []
            continue
        qset = qsets[qid]
        if not qset:
            raise SelectionConfigError(f"query {qid!r} has no pattern ground truth")
        if mode == "ground_truth":
            key = combo_key(qset)
            candidates = [p for p in pair_ids if psets[p] == frozenset(key.split("+"))]
            if not candidates:
                raise SelectionError(f"no pool pair matches combo key {key!r} for query {qid!r}")
        else:  # wrong
            candidates = [p for p in pair_ids if not (psets[p] & qset)]
            if not candidates:
                raise SelectionError(f"no pattern-disjoint pool pair exists for query {qid!r}")
        k = min(n, len(candidates))
        picks = rng.choice(len(candidates), size=k, replace=False)
        out[qid] = [candidates[int(i)] for i in picks]
    return out


def write_assignment(assignment: dict, path: str | os.PathLike) -> None:
    rows = [{"query_id": q, "pair_ids": pids} for q, pids in sorted(assignment.items())]
    write_jsonl(rows, path)


def read_assignment(path: str | os.PathLike) -> dict:
    return {r["query_id"]: list(r["pair_ids"]) for r in read_jsonl(path)}
