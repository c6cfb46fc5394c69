"""Descriptor extraction, bit-exact interchange, and exact cosine search.

The on-disk descriptor format (APDS) is: magic b"APDS", u32 version (=1),
u32 dim, u64 count, all little-endian, followed by count x dim float32
row-major. Ids live in a sidecar text file (same path + ".ids"), one id
per line, same order.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .image import luma601, resize_bilinear, validate_image

MAGIC = b"APDS"
VERSION = 1
UNIT_NORM_TOL = 1e-5


class CodecError(ValueError):
    """Malformed descriptor file; message names the failing field."""


class ShapeError(ValueError):
    pass


@dataclass
class DescriptorSet:
    ids: list
    vectors: np.ndarray  # (count, dim) float32, rows unit L2-norm

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2:
            raise ShapeError(f"vectors must be 2-D, got shape {self.vectors.shape}")
        if len(self.ids) != self.vectors.shape[0]:
            raise ShapeError(f"{len(self.ids)} ids vs {self.vectors.shape[0]} rows")
        if len(set(self.ids)) != len(self.ids):
            raise ShapeError("duplicate ids in descriptor set")
        if self.vectors.size:
            if not np.all(np.isfinite(self.vectors)):
                raise ShapeError("non-finite descriptor values")
            norms = np.linalg.norm(self.vectors.astype(np.float64), axis=1)
            bad = np.abs(norms - 1.0) > UNIT_NORM_TOL
            if np.any(bad):
                raise ShapeError(f"{int(bad.sum())} rows are not unit-norm")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]


def thumbnail_descriptor(image: np.ndarray) -> np.ndarray:
    """256-d baseline descriptor: 16x16 BT.601 grayscale, mean-centered,
    L2-normalized. Constant images map to the first basis vector."""
    validate_image(image)
    small = resize_bilinear(image, 16, 16)
    v = luma601(small).ravel()
    v = v - v.mean()
    norm = np.linalg.norm(v)
    if norm < 1e-12:
        e1 = np.zeros(256, dtype=np.float32)
        e1[0] = 1.0
        return e1
    return (v / norm).astype(np.float32)


def describe_images(paths: list, ids: list, backend=thumbnail_descriptor) -> DescriptorSet:
    from .image import load_image

    vecs = np.stack([backend(load_image(p)) for p in paths]) if paths else np.zeros((0, 256), np.float32)
    return DescriptorSet(ids=list(ids), vectors=vecs)


# ---------------------------------------------------------------------------
# APDS codec

_HEADER = struct.Struct("<4sIIQ")


def write_descriptors(dset: DescriptorSet, path: str | os.PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dset.dim, len(dset)))
        fh.write(np.ascontiguousarray(dset.vectors, dtype="<f4").tobytes())
    with open(str(path) + ".ids", "w", encoding="utf-8") as fh:
        for i in dset.ids:
            fh.write(i + "\n")


def read_descriptors(path: str | os.PathLike) -> DescriptorSet:
    path = Path(path)
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise CodecError(f"{path}: truncated header")
        magic, version, dim, count = _HEADER.unpack(header)
        if magic != MAGIC:
            raise CodecError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise CodecError(f"{path}: unsupported version {version}")
        payload = fh.read()
    expected = count * dim * 4
    if len(payload) != expected:
        raise CodecError(f"{path}: payload is {len(payload)} bytes, "
                         f"expected {expected} for count={count} dim={dim}")
    vectors = np.frombuffer(payload, dtype="<f4").reshape(count, dim).copy()
    ids_path = str(path) + ".ids"
    try:
        with open(ids_path, encoding="utf-8") as fh:
            ids = [line.rstrip("\n") for line in fh]
    except OSError as exc:
        raise CodecError(f"{ids_path}: missing id sidecar ({exc})") from None
    ids = [i for i in ids if i]
    if len(ids) != count:
        raise CodecError(f"{ids_path}: {len(ids)} ids for {count} vectors")
    return DescriptorSet(ids=ids, vectors=vectors)


# ---------------------------------------------------------------------------
# exact search

@dataclass
class MatchList:
    """Per-query ranked (gallery_id, score) lists, scores descending,
    ties broken by ascending gallery id."""
    matches: dict  # query_id -> list[(gallery_id, float)]

    def top1(self) -> dict:
        return {q: lst[0] for q, lst in self.matches.items() if lst}


def search_topk(queries: DescriptorSet, gallery: DescriptorSet, k: int) -> MatchList:
    """Exact brute-force cosine top-k (descriptors are unit-norm, so the
    dot product is the cosine)."""
    if queries.dim != gallery.dim:
        raise ShapeError(f"query dim {queries.dim} != gallery dim {gallery.dim}")
    if k < 1:
        raise ShapeError("k must be >= 1")
    k = min(k, len(gallery))
    gallery_ids = np.array(gallery.ids)
    id_order = np.argsort(gallery_ids, kind="stable")
    sims = queries.vectors.astype(np.float64) @ gallery.vectors.astype(np.float64).T
    out = {}
    for qi, qid in enumerate(queries.ids):
        row = sims[qi][id_order]
        # stable sort on descending score keeps the ascending-id tie order
        top = np.argsort(-row, kind="stable")[:k]
        sel = id_order[top]
        out[qid] = [(str(gallery_ids[g]), float(sims[qi][g])) for g in sel]
    return MatchList(matches=out)


def aggregate_max(match_lists: list) -> MatchList:
    """Per (query, gallery) pair keep the max score over N lists, re-rank."""
    if not match_lists:
        raise ShapeError("aggregate_max needs at least one MatchList")
    qids = set(match_lists[0].matches)
    for ml in match_lists[1:]:
        if set(ml.matches) != qids:
            raise ShapeError("inconsistent query id sets across match lists")
    out = {}
    for qid in qids:
        gids0 = {g for g, _ in match_lists[0].matches[qid]}
        best = {}
        for ml in match_lists:
            gids = {g for g, _ in ml.matches[qid]}
            if gids != gids0:
                raise ShapeError(f"inconsistent gallery id sets for query {qid!r}")
            for gid, score in ml.matches[qid]:
                if gid not in best or score > best[gid]:
                    best[gid] = score
        out[qid] = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
    return MatchList(matches=out)


# ---------------------------------------------------------------------------
# match CSV (query_id,gallery_id,score with 9 significant digits)


def write_matches(ml: MatchList, path: str | os.PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("query_id,gallery_id,score\n")
        for qid in sorted(ml.matches):
            for gid, score in ml.matches[qid]:
                fh.write(f"{qid},{gid},{score:.9g}\n")


def read_matches(path: str | os.PathLike) -> MatchList:
    out: dict = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "query_id,gallery_id,score":
            raise CodecError(f"{path}: expected match CSV header, got {header!r}")
        for lineno, line in enumerate(fh, 2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise CodecError(f"{path}:{lineno}: expected three columns")
            qid, gid, score = parts
            out.setdefault(qid, []).append((gid, float(score)))
    for qid, lst in out.items():
        lst.sort(key=lambda kv: (-kv[1], kv[0]))
    return MatchList(matches=out)
