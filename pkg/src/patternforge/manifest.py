"""JSONL manifests and small record helpers.

One JSON object per line, keys sorted, so identical runs produce
byte-identical files that diff cleanly.
"""

from __future__ import annotations

import json
import os
from pathlib import Path


class ManifestError(ValueError):
    pass


def write_jsonl(rows: list[dict], path: str | os.PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")


def read_jsonl(path: str | os.PathLike) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: bad JSON ({exc})") from None
    return rows


def read_sources(path: str | os.PathLike) -> list[dict]:
    """Source manifest rows: {"id": ..., "path": ...}, paths relative to the manifest."""
    rows = read_jsonl(path)
    base = Path(path).parent
    out = []
    seen = set()
    for row in rows:
        if "id" not in row or "path" not in row:
            raise ManifestError(f"{path}: source rows need 'id' and 'path'")
        if row["id"] in seen:
            raise ManifestError(f"{path}: duplicate source id {row['id']!r}")
        seen.add(row["id"])
        p = Path(row["path"])
        out.append({"id": row["id"], "path": str(p if p.is_absolute() else base / p)})
    return out


def write_gt_csv(pairs: list[tuple[str, str]], path: str | os.PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("query_id,source_id\n")
        for qid, sid in pairs:
            fh.write(f"{qid},{sid}\n")


def read_gt_csv(path: str | os.PathLike) -> dict[str, str]:
    gt = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "query_id,source_id":
            raise ManifestError(f"{path}: expected header 'query_id,source_id', got {header!r}")
        for lineno, line in enumerate(fh, 2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ManifestError(f"{path}:{lineno}: expected two columns")
            if parts[0] in gt:
                raise ManifestError(f"{path}:{lineno}: duplicate query id {parts[0]!r}")
            gt[parts[0]] = parts[1]
    return gt
