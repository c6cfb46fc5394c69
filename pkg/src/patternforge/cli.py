"""patternforge command line: forge datasets, describe, match, select, eval.

Exit codes: 0 success, 1 partial per-record data errors, 2 usage/config
errors. All randomness flows from --seed (env PATTERNFORGE_SEED); every
run writes a run.json echo of its effective configuration.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from . import forge as forge_mod
from . import metrics as metrics_mod
from . import patterns as patterns_mod
from . import prompts as prompts_mod
from .descriptors import (
    CodecError,
    ShapeError,
    describe_images,
    read_descriptors,
    read_matches,
    search_topk,
    write_descriptors,
    write_matches,
)
from .forge import ForgeConfig, ConfigError
from .image import ImageError, load_image, save_png
from .manifest import ManifestError, read_gt_csv, read_jsonl, read_sources

_USAGE_ERRORS = (ConfigError, ManifestError, CodecError, ShapeError, ImageError,
                 patterns_mod.CatalogError, patterns_mod.ParamError,
                 prompts_mod.SelectionConfigError, prompts_mod.SelectionError,
                 metrics_mod.MetricInputError, FileNotFoundError)


def _run_json(out_dir: Path, subcommand: str, config: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "run.json", "w", encoding="utf-8") as fh:
        json.dump({"subcommand": subcommand, "config": config,
                   "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fail(exc) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(2)


seed_option = click.option("--seed", type=int, default=0, envvar="PATTERNFORGE_SEED",
                           show_default=True, help="global seed")
workers_option = click.option("--workers", type=int, default=1, show_default=True)


@click.group()
def main():
    """Benchmark toolkit for in-context image copy detection."""


# ---------------------------------------------------------------------------
# patterns


@main.group("patterns")
def patterns_group():
    """Inspect and demo the tamper pattern catalog."""


@patterns_group.command("list")
def patterns_list():
    """Print the catalog, one JSON object per line."""
    for d in patterns_mod.catalog():
        click.echo(json.dumps({"id": d.id, "category": d.category, "split": d.split,
                               "param_schema": d.param_schema}, sort_keys=True))


@patterns_group.command("demo")
@click.option("--pattern", "pattern_id", required=True)
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--count", type=int, default=4, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@seed_option
def patterns_demo(pattern_id, input_path, count, out_dir, seed):
    """Write COUNT seeded variants of one pattern applied to an image."""
    try:
        img = load_image(input_path)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i in range(count):
            inst = patterns_mod.sample_instance(
                pattern_id, forge_mod.derive_seed(seed, pattern_id, i))
            save_png(patterns_mod.apply(img, inst), out / f"{pattern_id}_{i:03d}.png")
        _run_json(out, "patterns demo",
                  {"pattern": pattern_id, "input": str(input_path), "count": count, "seed": seed})
    except _USAGE_ERRORS as exc:
        _fail(exc)


# ---------------------------------------------------------------------------
# forge


@main.group("forge")
def forge_group():
    """Build training sets, eval sets, and prompt pools."""


def _finish_forge(out_dir, errors):
    if errors:
        click.echo(f"{len(errors)} record(s) failed; see errors.jsonl", err=True)
        sys.exit(1)


@forge_group.command("train")
@click.option("--sources", "sources_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--replicas", type=int, default=9, show_default=True)
@click.option("--kmin", type=int, default=1, show_default=True)
@click.option("--kmax", type=int, default=3, show_default=True)
@click.option("--patterns", "allowed", default=None,
              help="comma-separated pattern subset within the base split")
@seed_option
@workers_option
def forge_train(sources_path, out_dir, replicas, kmin, kmax, allowed, seed, workers):
    try:
        sources = read_sources(sources_path)
        cfg = ForgeConfig(global_seed=seed, replicas_per_original=replicas,
                          combo_size_range=(kmin, kmax), pattern_split_selector="base",
                          allowed_patterns=allowed.split(",") if allowed else None)
        _run_json(Path(out_dir), "forge train", forge_mod.config_echo(cfg))
        _records, errors = forge_mod.forge_training_set(sources, cfg, out_dir, workers=workers)
    except _USAGE_ERRORS as exc:
        _fail(exc)
    _finish_forge(out_dir, errors)


@forge_group.command("eval")
@click.option("--gallery-sources", required=True, type=click.Path())
@click.option("--distractor-sources", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--n-true", type=int, default=50, show_default=True)
@click.option("--n-distractors", type=int, default=200, show_default=True)
@click.option("--kmin", type=int, default=1, show_default=True)
@click.option("--kmax", type=int, default=3, show_default=True)
@click.option("--patterns", "allowed", default=None,
              help="comma-separated pattern subset within the novel split")
@seed_option
@workers_option
def forge_eval(gallery_sources, distractor_sources, out_dir, n_true, n_distractors,
               kmin, kmax, allowed, seed, workers):
    try:
        gal = read_sources(gallery_sources)
        dis = read_sources(distractor_sources)
        cfg = ForgeConfig(global_seed=seed, combo_size_range=(kmin, kmax),
                          n_true_queries=n_true, n_distractor_queries=n_distractors,
                          pattern_split_selector="novel",
                          allowed_patterns=allowed.split(",") if allowed else None)
        _run_json(Path(out_dir), "forge eval", forge_mod.config_echo(cfg))
        _q, _g, errors = forge_mod.forge_eval_set(gal, dis, cfg, out_dir, workers=workers)
    except _USAGE_ERRORS as exc:
        _fail(exc)
    _finish_forge(out_dir, errors)


@forge_group.command("pool")
@click.option("--sources", "sources_path", required=True, type=click.Path())
@click.option("--queries", "queries_path", required=True, type=click.Path(),
              help="queries.jsonl whose true-query combo keys define the pool")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--pairs-per-combo", type=int, default=10, show_default=True)
@seed_option
@workers_option
def forge_pool(sources_path, queries_path, out_dir, pairs_per_combo, seed, workers):
    try:
        sources = read_sources(sources_path)
        queries = read_jsonl(queries_path)
        keys = forge_mod.query_combo_keys(queries)
        cfg = ForgeConfig(global_seed=seed, pool_pairs_per_combo=pairs_per_combo,
                          pattern_split_selector="novel")
        _run_json(Path(out_dir), "forge pool",
                  {**forge_mod.config_echo(cfg), "combo_keys": keys})
        _entries, errors = forge_mod.build_prompt_pool(sources, keys, cfg, out_dir,
                                                       workers=workers)
    except _USAGE_ERRORS as exc:
        _fail(exc)
    _finish_forge(out_dir, errors)


# ---------------------------------------------------------------------------
# describe / match / select / eval


@main.command("describe")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(),
              help="JSONL manifest with id + path columns")
@click.option("--root", "root_dir", default=None, type=click.Path(),
              help="base directory for relative paths (default: manifest directory)")
@click.option("--out", "out_path", required=True, type=click.Path())
def describe_cmd(manifest_path, root_dir, out_path):
    """Extract thumbnail descriptors for every image in a manifest."""
    try:
        rows = read_jsonl(manifest_path)
        root = Path(root_dir) if root_dir else Path(manifest_path).parent
        ids = [r["id"] for r in rows]
        paths = [root / r["path"] for r in rows]
        dset = describe_images(paths, ids)
        write_descriptors(dset, out_path)
        _run_json(Path(out_path).parent, "describe",
                  {"manifest": str(manifest_path), "out": str(out_path), "count": len(ids)})
    except _USAGE_ERRORS as exc:
        _fail(exc)


@main.command("match")
@click.option("--queries", "queries_path", required=True, type=click.Path())
@click.option("--gallery", "gallery_path", required=True, type=click.Path())
@click.option("-k", "--topk", type=int, default=10, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def match_cmd(queries_path, gallery_path, topk, out_path):
    """Exact cosine top-k search between two descriptor files."""
    try:
        q = read_descriptors(queries_path)
        g = read_descriptors(gallery_path)
        ml = search_topk(q, g, topk)
        write_matches(ml, out_path)
        _run_json(Path(out_path).parent, "match",
                  {"queries": str(queries_path), "gallery": str(gallery_path), "k": topk})
    except _USAGE_ERRORS as exc:
        _fail(exc)


@main.command("select")
@click.option("--mode", required=True, type=click.Choice(prompts_mod.MODES))
@click.option("--queries", "queries_path", required=True, type=click.Path())
@click.option("--pool", "pool_path", required=True, type=click.Path())
@click.option("-n", "--num-pairs", type=int, default=1, show_default=True)
@click.option("--query-features", default=None, type=click.Path())
@click.option("--pool-features", default=None, type=click.Path())
@click.option("--gt", "gt_path", default=None, type=click.Path(),
              help="gt.csv, required by ground_truth/wrong/self_upper modes")
@click.option("--out", "out_path", required=True, type=click.Path())
@seed_option
def select_cmd(mode, queries_path, pool_path, num_pairs, query_features,
               pool_features, gt_path, out_path, seed):
    """Assign prompt pairs to queries under one selection mode."""
    try:
        queries = read_jsonl(queries_path)
        pool = read_jsonl(pool_path)
        qf = read_descriptors(query_features) if query_features else None
        pf = read_descriptors(pool_features) if pool_features else None
        gt = read_gt_csv(gt_path) if gt_path else None
        assignment = prompts_mod.select_prompts(
            mode, queries, pool, n=num_pairs, seed=seed,
            query_pattern_features=qf, pool_pattern_features=pf, gt=gt)
        prompts_mod.write_assignment(assignment, out_path)
        _run_json(Path(out_path).parent, "select",
                  {"mode": mode, "n": num_pairs, "seed": seed})
    except _USAGE_ERRORS as exc:
        _fail(exc)


@main.command("eval")
@click.option("--matches", "matches_path", required=True, type=click.Path())
@click.option("--gt", "gt_path", required=True, type=click.Path())
@click.option("--gallery", "gallery_path", required=True, type=click.Path(),
              help="gallery.jsonl (for the gallery size in the report)")
@click.option("--assignment", "assignment_path", default=None, type=click.Path())
@click.option("--queries", "queries_path", default=None, type=click.Path())
@click.option("--pool", "pool_path", default=None, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
def eval_cmd(matches_path, gt_path, gallery_path, assignment_path, queries_path,
             pool_path, out_path):
    """Score a match file: muAP, recall@1, optional pattern accuracy."""
    try:
        ml = read_matches(matches_path)
        gt = read_gt_csv(gt_path)
        gallery_size = len(read_jsonl(gallery_path))
        assignment = query_patterns = pool_patterns = None
        if assignment_path:
            if not (queries_path and pool_path):
                raise ConfigError("--assignment needs --queries and --pool for pattern accuracy")
            assignment = prompts_mod.read_assignment(assignment_path)
            queries = read_jsonl(queries_path)
            query_patterns = {r["id"]: sorted({c["pattern_id"] for c in r["combo"]})
                              for r in queries if r["id"] in gt}
            pool_patterns = {e["pair_id"]: sorted(e["combo_key"].split("+"))
                             for e in read_jsonl(pool_path)}
        report = metrics_mod.build_report(ml, gt, gallery_size, assignment=assignment,
                                          query_patterns=query_patterns,
                                          pool_patterns=pool_patterns)
        report.save(out_path)
        _run_json(Path(out_path).parent, "eval",
                  {"matches": str(matches_path), "gt": str(gt_path)})
        click.echo(json.dumps(report.to_dict(), sort_keys=True))
    except _USAGE_ERRORS as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
