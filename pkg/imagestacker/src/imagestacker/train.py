"""Training on a forge training manifest.

Each training record is a source original or a replica carrying its
pattern combo. Replicas are stacked with a ground-truth prompt pair: the
original of a different source plus that source's replica sharing the
same pattern-set key. Originals (and replicas with no such partner) use
pseudo-prompts. Classes for the classification loss are source images.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .losses import LossConfig, bce_pattern_loss, combined_loss, cosface_loss
from .model import StackerViT, ViTConfig
from .sampler import pk_batches
from .stacking import load_rgb, pseudo, stack


class InputError(ValueError):
    pass


def read_manifest(path: str | os.PathLike) -> list:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _pattern_set_key(record: dict) -> str:
    return "+".join(sorted({c["pattern_id"] for c in record["combo"]}))


class TrainSet:
    """Preloaded training images with labels and prompt pairings."""

    def __init__(self, manifest_path, root, image_side: int,
                 pattern_vocab: list | None = None, seed: int = 0):
        root = Path(root)
        records = read_manifest(manifest_path)
        for r in records:
            if "combo" not in r or "source_id" not in r:
                raise InputError(f"record {r.get('id')!r} lacks pattern provenance")
        records.sort(key=lambda r: r["id"])
        self.records = records
        self.side = image_side

        if pattern_vocab is None:
            pattern_vocab = sorted({c["pattern_id"] for r in records for c in r["combo"]})
        self.pattern_vocab = list(pattern_vocab)
        vocab_index = {p: i for i, p in enumerate(self.pattern_vocab)}

        self.class_ids = sorted({r["source_id"] for r in records})
        class_index = {s: i for i, s in enumerate(self.class_ids)}

        self.images = np.stack([load_rgb(root / r["path"], image_side) for r in records])
        self.class_labels = np.array([class_index[r["source_id"]] for r in records])
        self.pattern_labels = np.zeros((len(records), len(self.pattern_vocab)), np.float32)
        for i, r in enumerate(records):
            for c in r["combo"]:
                if c["pattern_id"] not in vocab_index:
                    raise InputError(f"pattern {c['pattern_id']!r} not in vocabulary")
                self.pattern_labels[i, vocab_index[c["pattern_id"]]] = 1.0

        self._assign_prompts(seed)

    def _assign_prompts(self, seed):
        """For each replica, pick a same-pattern-set replica of another
        source; its pair is (that source's original, that replica)."""
        orig_row = {r["source_id"]: i for i, r in enumerate(self.records)
                    if not r["combo"]}
        by_key = {}
        for i, r in enumerate(self.records):
            if r["combo"]:
                by_key.setdefault(_pattern_set_key(r), []).append(i)
        rng = np.random.default_rng(seed)
        # prompt_pairs[i] = (original row, replica row) or None for pseudo
        self.prompt_pairs = [None] * len(self.records)
        for i, r in enumerate(self.records):
            if not r["combo"]:
                continue
            candidates = [j for j in by_key[_pattern_set_key(r)]
                          if self.records[j]["source_id"] != r["source_id"]
                          and self.records[j]["source_id"] in orig_row]
            if candidates:
                j = candidates[int(rng.integers(len(candidates)))]
                self.prompt_pairs[i] = (orig_row[self.records[j]["source_id"]], j)

    def class_members(self) -> dict:
        out = {}
        for i, lbl in enumerate(self.class_labels):
            out.setdefault(int(lbl), []).append(i)
        return out

    def stacked(self, i: int) -> np.ndarray:
        pair = self.prompt_pairs[i]
        if pair is None:
            return pseudo(self.images[i])
        return stack(self.images[pair[0]], self.images[pair[1]], self.images[i])

    def batch(self, indices) -> tuple:
        x = torch.from_numpy(np.stack([self.stacked(i) for i in indices]))
        cls = torch.from_numpy(self.class_labels[indices])
        ptr = torch.from_numpy(self.pattern_labels[indices])
        return x, cls, ptr


def train(dataset: TrainSet, model_config: ViTConfig | None = None,
          loss_config: LossConfig | None = None, steps: int = 300,
          batch_classes: int = 16, batch_per_class: int = 4,
          lr: float = 1e-3, seed: int = 0, device: str = "cpu",
          model: StackerViT | None = None):
    """Train a model on the dataset; returns (model, class_weights, losses)."""
    if model is not None:
        model_config = model.config
    if model_config is None:
        model_config = ViTConfig(image_side=dataset.side,
                                 pattern_count=len(dataset.pattern_vocab))
    if model_config.pattern_count != len(dataset.pattern_vocab):
        raise InputError(f"model pattern_count {model_config.pattern_count} != "
                         f"vocabulary size {len(dataset.pattern_vocab)}")
    if loss_config is None:
        loss_config = LossConfig()

    torch.manual_seed(seed)
    if model is None:
        model = StackerViT(model_config)
    model = model.to(device)
    class_weights = nn.Parameter(
        torch.randn(len(dataset.class_ids), model_config.width, device=device) * 0.01)
    opt = torch.optim.AdamW(list(model.parameters()) + [class_weights], lr=lr)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=steps)

    members = {c: np.array(v) for c, v in dataset.class_members().items()}
    losses = []
    model.train()
    for batch in pk_batches(members, batch_classes, batch_per_class, steps, seed):
        x, cls_labels, ptr_labels = dataset.batch(batch)
        x = x.to(device)
        cls_feat, ptr_feat = model(x)
        l_cls = cosface_loss(cls_feat, cls_labels.to(device), class_weights,
                             loss_config.margin, loss_config.scale)
        probs = torch.sigmoid(model.pattern_logits(ptr_feat))
        l_ptr = bce_pattern_loss(probs, ptr_labels.to(device))
        loss = combined_loss(l_cls, l_ptr, loss_config.balance)
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched.step()
        losses.append(float(loss.detach()))
    model.eval()
    return model, class_weights, losses


def save_checkpoint(path, model: StackerViT, dataset: TrainSet, losses: list) -> None:
    torch.save({
        "config": model.config.__dict__,
        "state": model.state_dict(),
        "pattern_vocab": dataset.pattern_vocab,
        "class_ids": dataset.class_ids,
        "losses": losses,
    }, path)


def load_checkpoint(path) -> tuple:
    blob = torch.load(path, map_location="cpu", weights_only=False)
    model = StackerViT(ViTConfig(**blob["config"]))
    model.load_state_dict(blob["state"])
    model.eval()
    return model, blob
