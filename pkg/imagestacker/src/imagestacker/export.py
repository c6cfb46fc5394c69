"""Feature export in the harness interchange format.

Class features come from the prompted forward pass (pseudo-prompt when a
query has no assigned pair, always for galleries); pattern features come
from the pseudo-prompt pass. Files are float32 row-major with an id
sidecar, readable by the retrieval harness.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np
import torch

from .stacking import load_rgb, pseudo, stack
from .train import InputError

_MAGIC = b"APDS"
_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")


class CodecError(ValueError):
    pass


def write_apds(ids: list, vectors: np.ndarray, path: str | os.PathLike) -> None:
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    if vectors.ndim != 2 or vectors.shape[0] != len(ids):
        raise CodecError(f"vector shape {vectors.shape} does not match {len(ids)} ids")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, vectors.shape[1], vectors.shape[0]))
        fh.write(vectors.tobytes())
    with open(str(path) + ".ids", "w", encoding="utf-8") as fh:
        fh.writelines(f"{i}\n" for i in ids)


def read_apds(path: str | os.PathLike) -> tuple:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise CodecError("truncated header")
    magic, version, dim, count = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise CodecError(f"bad magic {magic!r}")
    if version != _VERSION:
        raise CodecError(f"unsupported version {version}")
    body = raw[_HEADER.size:]
    if len(body) != 4 * dim * count:
        raise CodecError("truncated body")
    vectors = np.frombuffer(body, dtype="<f4").reshape(count, dim)
    ids = Path(str(path) + ".ids").read_text(encoding="utf-8").splitlines()
    if len(ids) != count:
        raise CodecError(f"id count {len(ids)} != vector count {count}")
    return ids, vectors


def _l2(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return x / norms


def _forward_batched(model, arrays, batch_size=64):
    outs_cls, outs_ptr = [], []
    with torch.no_grad():
        for i in range(0, len(arrays), batch_size):
            x = torch.from_numpy(np.stack(arrays[i:i + batch_size]))
            c, p = model(x)
            outs_cls.append(c.numpy())
            outs_ptr.append(p.numpy())
    return np.concatenate(outs_cls), np.concatenate(outs_ptr)


def export_features(model, records: list, root, class_out, pattern_out,
                    assignment: dict | None = None, pool_entries: list | None = None,
                    pool_root=None, source_paths: dict | None = None) -> None:
    """Write class and pattern feature files for the manifest records.

    `assignment` maps record id -> [pair id, ...]; the first pair is used.
    Pair ids of the form "self:<id>" pair the record's own source original
    (looked up in `source_paths`) with the record image itself. Records
    without an assignment, and gallery exports (assignment=None), use the
    pseudo-prompt.
    """
    model.eval()
    root = Path(root)
    side = model.config.image_side
    pool_root = Path(pool_root) if pool_root is not None else root
    pairs = {e["pair_id"]: e for e in pool_entries or []}

    targets = [load_rgb(root / r["path"], side) for r in records]
    ids = [r["id"] for r in records]

    prompted = []
    for rec, target in zip(records, targets):
        assigned = (assignment or {}).get(rec["id"], [])
        if not assigned:
            prompted.append(pseudo(target))
            continue
        pid = assigned[0]
        if pid.startswith("self:"):
            if not source_paths or rec["id"] not in source_paths:
                raise InputError(f"no source image known for pair {pid!r}")
            orig = load_rgb(source_paths[rec["id"]], side)
            prompted.append(stack(orig, target, target))
        else:
            if pid not in pairs:
                raise InputError(f"unknown pool pair {pid!r}")
            entry = pairs[pid]
            orig = load_rgb(pool_root / entry["original_path"], side)
            rep = load_rgb(pool_root / entry["replica_path"], side)
            prompted.append(stack(orig, rep, target))

    cls_feat, _ = _forward_batched(model, prompted)
    _, ptr_feat = _forward_batched(model, [pseudo(t) for t in targets])
    write_apds(ids, _l2(cls_feat.astype(np.float64)).astype(np.float32), class_out)
    write_apds(ids, _l2(ptr_feat.astype(np.float64)).astype(np.float32), pattern_out)


def export_pool_pattern_features(model, pool_entries: list, pool_root, out) -> None:
    """Pattern features of prompt pairs: each pair stacked with its own
    replica as the target."""
    model.eval()
    side = model.config.image_side
    pool_root = Path(pool_root)
    arrays, ids = [], []
    for e in sorted(pool_entries, key=lambda e: e["pair_id"]):
        orig = load_rgb(pool_root / e["original_path"], side)
        rep = load_rgb(pool_root / e["replica_path"], side)
        arrays.append(stack(orig, rep, rep))
        ids.append(e["pair_id"])
    _, ptr = _forward_batched(model, arrays)
    write_apds(ids, _l2(ptr.astype(np.float64)).astype(np.float32), out)
