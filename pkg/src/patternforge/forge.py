"""Dataset forging: training sets, eval sets, and prompt pools.

Every output record gets its own seed derived by hashing (global seed,
entity id, index), so the forged tree is byte-identical for any worker
count. Manifests are assembled single-writer, sorted by record id.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from pathlib import Path

from . import patterns
from .image import ImageError, load_image, save_png
from .manifest import write_gt_csv, write_jsonl
from .patterns import PatternCombo, PatternInstance, sample_instance
from .rng import derive_seed, make_rng


class ConfigError(ValueError):
    pass


@dataclass
class ForgeConfig:
    global_seed: int = 0
    replicas_per_original: int = 9
    combo_size_range: tuple = (1, 3)
    n_true_queries: int = 0
    n_distractor_queries: int = 0
    pool_pairs_per_combo: int = 10
    pattern_split_selector: str = "base"
    # optional restriction to a subset of the selected split's patterns
    allowed_patterns: list | None = None

    def __post_init__(self):
        kmin, kmax = self.combo_size_range
        if kmin < 1:
            raise ConfigError("combo_size_range minimum must be >= 1")
        if kmax < kmin:
            raise ConfigError("combo_size_range must be (kmin, kmax) with kmax >= kmin")
        if self.pattern_split_selector not in ("base", "novel"):
            raise ConfigError(f"bad pattern_split_selector {self.pattern_split_selector!r}")
        for n in (self.replicas_per_original, self.n_true_queries,
                  self.n_distractor_queries, self.pool_pairs_per_combo):
            if n < 0:
                raise ConfigError("counts must be >= 0")

    def split_pattern_ids(self) -> list[str]:
        ids = patterns.split_ids(self.pattern_split_selector)
        if self.allowed_patterns is not None:
            allowed = set(self.allowed_patterns)
            unknown = allowed - {d.id for d in patterns.catalog()}
            if unknown:
                raise ConfigError(f"unknown pattern ids in allowed_patterns: {sorted(unknown)}")
            ids = [i for i in ids if i in allowed]
        if not ids:
            raise ConfigError("pattern selection is empty")
        return ids


def combo_key(pattern_ids) -> str:
    """Canonical order-insensitive key for a pattern combination."""
    return "+".join(sorted(set(pattern_ids)))


def serialize_combo(combo: PatternCombo) -> list:
    return [{"pattern_id": i.pattern_id, "params": i.params, "seed": i.seed} for i in combo.instances]


def deserialize_combo(rows: list) -> PatternCombo:
    return PatternCombo(tuple(
        PatternInstance(r["pattern_id"], r["params"], r["seed"]) for r in rows
    ))


def sample_combo(split_ids: list, seed: int, size_range: tuple) -> PatternCombo:
    """Seeded combo: k uniform in range, patterns without replacement, seeded order."""
    kmin, kmax = size_range
    if kmax > len(split_ids):
        raise ConfigError(f"combo size {kmax} exceeds pattern set size {len(split_ids)}")
    rng = make_rng(seed)
    k = int(rng.integers(kmin, kmax + 1))
    picks = rng.choice(len(split_ids), size=k, replace=False)
    instances = []
    for pos, idx in enumerate(picks):
        pid = split_ids[int(idx)]
        instances.append(sample_instance(pid, derive_seed(seed, pid, pos)))
    return PatternCombo(tuple(instances))


def combo_for_key(key: str, seed: int) -> PatternCombo:
    """Seeded combo realizing exactly the patterns named in a combo key."""
    ids = key.split("+")
    rng = make_rng(seed)
    order = rng.permutation(len(ids))
    instances = []
    for pos, idx in enumerate(order):
        pid = ids[int(idx)]
        instances.append(sample_instance(pid, derive_seed(seed, pid, pos)))
    return PatternCombo(tuple(instances))


# ---------------------------------------------------------------------------
# per-record jobs (top level so they pickle for process pools)


def _needs_partner(combo: PatternCombo) -> bool:
    return any(i.pattern_id in patterns.PARTNER_PATTERNS for i in combo.instances)


def _forge_one(job):
    """Produce one output image + its provenance record.

    job: dict with rid, source (id/path), combo rows or None, seed,
    out_path (absolute), rel_path, split, pair_id, partner_paths.
    """
    try:
        img = load_image(job["source_path"])
    except (OSError, ImageError) as exc:
        return {"error": f"{job['source_path']}: {exc}", "id": job["rid"]}
    try:
        if job["combo"]:
            combo = deserialize_combo(job["combo"])
            partner = None
            if _needs_partner(combo):
                pool = job["partner_paths"]
                idx = derive_seed(job["seed"], "partner", 0) % len(pool)
                partner = load_image(pool[idx])
            img = patterns.apply_combo(img, combo, partner=partner)
        out_path = Path(job["out_path"])
        out_path.parent.mkdir(parents=True, exist_ok=True)
        save_png(img, out_path)
    except (OSError, ImageError, patterns.PatternError) as exc:
        return {"error": f"{job['rid']}: {exc}", "id": job["rid"]}
    return {
        "id": job["rid"],
        "source_id": job["source_id"],
        "split": job["split"],
        "combo": job["combo"],
        "pair_id": job["pair_id"],
        "path": job["rel_path"],
    }


def _run_jobs(jobs, workers):
    if workers <= 1:
        results = [_forge_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_forge_one, jobs, chunksize=8))
    records = sorted((r for r in results if "error" not in r), key=lambda r: r["id"])
    errors = sorted((r for r in results if "error" in r), key=lambda r: r["id"])
    return records, errors


def _job(rid, source, combo, seed, run_root, subdir, split, partner_paths, pair_id=None):
    rel = f"images/{subdir}/{rid}.png"
    return {
        "rid": rid,
        "source_id": source["id"],
        "source_path": source["path"],
        "combo": serialize_combo(combo) if combo is not None else [],
        "seed": seed,
        "out_path": str(Path(run_root) / rel),
        "rel_path": rel,
        "split": split,
        "pair_id": pair_id,
        "partner_paths": partner_paths,
    }


# ---------------------------------------------------------------------------
# forge entry points


def forge_training_set(sources: list, config: ForgeConfig, run_root: str | os.PathLike,
                       workers: int = 1):
    """One untransformed record plus `replicas_per_original` base-pattern
    replicas per source. Returns (records, errors); writes train.jsonl."""
    if config.pattern_split_selector != "base":
        raise ConfigError("training sets use the base split")
    base_ids = config.split_pattern_ids()
    partner_paths = [s["path"] for s in sources]
    jobs = []
    for src in sources:
        sid = src["id"]
        jobs.append(_job(f"{sid}-orig", src, None, 0, run_root, "train", "train", partner_paths))
        for j in range(1, config.replicas_per_original + 1):
            seed = derive_seed(config.global_seed, sid, j)
            combo = sample_combo(base_ids, seed, config.combo_size_range)
            jobs.append(_job(f"{sid}-r{j:03d}", src, combo, seed, run_root, "train", "train", partner_paths))
    records, errors = _run_jobs(jobs, workers)
    write_jsonl(records, Path(run_root) / "train.jsonl")
    if errors:
        write_jsonl(errors, Path(run_root) / "errors.jsonl")
    return records, errors


def forge_eval_set(gallery_sources: list, distractor_sources: list, config: ForgeConfig,
                   run_root: str | os.PathLike, workers: int = 1):
    """Gallery copies, novel-combo true queries, and distractor queries.

    Writes queries.jsonl, gallery.jsonl and gt.csv (true queries only).
    Returns (query_records, gallery_records, errors).
    """
    if config.pattern_split_selector != "novel":
        raise ConfigError("eval sets use the novel split")
    novel_ids = config.split_pattern_ids()
    if config.n_true_queries > len(gallery_sources):
        raise ConfigError(f"n_true_queries={config.n_true_queries} exceeds "
                          f"gallery size {len(gallery_sources)}")
    if config.n_distractor_queries > len(distractor_sources):
        raise ConfigError(f"n_distractor_queries={config.n_distractor_queries} exceeds "
                          f"distractor source count {len(distractor_sources)}")
    gallery_source_ids = {s["id"] for s in gallery_sources}
    overlap = gallery_source_ids & {s["id"] for s in distractor_sources}
    if overlap:
        raise ConfigError(f"distractor sources overlap gallery: {sorted(overlap)[:5]}")

    jobs = []
    for src in gallery_sources:
        jobs.append(_job(f"{src['id']}", src, None, 0, run_root, "gallery", "gallery", []))

    rng = make_rng(derive_seed(config.global_seed, "true_query_sources", 0))
    picks = rng.choice(len(gallery_sources), size=config.n_true_queries, replace=False)
    gt_pairs = []
    for i, idx in enumerate(sorted(int(x) for x in picks)):
        src = gallery_sources[idx]
        qid = f"q{i:05d}"
        seed = derive_seed(config.global_seed, qid, 0)
        combo = sample_combo(novel_ids, seed, config.combo_size_range)
        jobs.append(_job(qid, src, combo, seed, run_root, "queries", "query", []))
        gt_pairs.append((qid, src["id"]))

    for i in range(config.n_distractor_queries):
        src = distractor_sources[i]
        did = f"d{i:05d}"
        seed = derive_seed(config.global_seed, did, 0)
        combo = sample_combo(novel_ids, seed, config.combo_size_range)
        jobs.append(_job(did, src, combo, seed, run_root, "queries", "distractor", []))

    records, errors = _run_jobs(jobs, workers)
    gallery_records = [r for r in records if r["split"] == "gallery"]
    query_records = [r for r in records if r["split"] in ("query", "distractor")]
    write_jsonl(gallery_records, Path(run_root) / "gallery.jsonl")
    write_jsonl(query_records, Path(run_root) / "queries.jsonl")
    write_gt_csv(gt_pairs, Path(run_root) / "gt.csv")
    if errors:
        write_jsonl(errors, Path(run_root) / "errors.jsonl")
    return query_records, gallery_records, errors


def query_combo_keys(query_records: list) -> list:
    """Sorted unique combo keys over true-query records."""
    keys = {combo_key([c["pattern_id"] for c in r["combo"]])
            for r in query_records if r["split"] == "query"}
    return sorted(keys)


def build_prompt_pool(pool_sources: list, combo_keys: list, config: ForgeConfig,
                      run_root: str | os.PathLike, workers: int = 1):
    """pool_pairs_per_combo (original, replica) pairs per combo key.

    Pool sources must be disjoint from gallery/query sources (caller
    supplies a held-out manifest); each pair consumes its own source.
    Writes pool.jsonl; returns (pool_entries, errors).
    """
    needed = len(combo_keys) * config.pool_pairs_per_combo
    if needed > len(pool_sources):
        raise ConfigError(f"prompt pool needs {needed} disjoint sources, "
                          f"have {len(pool_sources)}")
    jobs = []
    entries = []
    src_iter = iter(pool_sources)
    for ki, key in enumerate(sorted(combo_keys)):
        for j in range(config.pool_pairs_per_combo):
            pair_id = f"p{ki:03d}-{j:02d}"
            src = next(src_iter)
            seed = derive_seed(config.global_seed, pair_id, 0)
            combo = combo_for_key(key, seed)
            jobs.append(_job(f"{pair_id}-orig", src, None, 0, run_root, "pool",
                             "pool_original", [], pair_id=pair_id))
            jobs.append(_job(f"{pair_id}-rep", src, combo, seed, run_root, "pool",
                             "pool_replica", [], pair_id=pair_id))
            entries.append({
                "pair_id": pair_id,
                "combo_key": key,
                "source_id": src["id"],
                "original_path": f"images/pool/{pair_id}-orig.png",
                "replica_path": f"images/pool/{pair_id}-rep.png",
                "combo": serialize_combo(combo),
            })
    records, errors = _run_jobs(jobs, workers)
    ok_ids = {r["id"] for r in records}
    entries = [e for e in entries
               if f"{e['pair_id']}-orig" in ok_ids and f"{e['pair_id']}-rep" in ok_ids]
    write_jsonl(sorted(entries, key=lambda e: e["pair_id"]), Path(run_root) / "pool.jsonl")
    if errors:
        write_jsonl(errors, Path(run_root) / "errors.jsonl")
    return entries, errors


def config_echo(config: ForgeConfig) -> dict:
    d = asdict(config)
    d["combo_size_range"] = list(d["combo_size_range"])
    return d
