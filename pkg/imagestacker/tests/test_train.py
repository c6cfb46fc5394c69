from collections import Counter

import pytest
import torch

from imagestacker import (LossConfig, StackerViT, TrainSet, ViTConfig,
                          bce_pattern_loss, combined_loss, cosface_loss,
                          load_checkpoint, pk_batches, save_checkpoint, train)
from imagestacker.train import InputError


SMALL_CFG = dict(image_side=32, patch_side=8, depth=2, width=64, heads=4)


class TestPkSampler:
    def test_batch_composition(self):
        members = {c: list(range(c * 10, c * 10 + 3 + c)) for c in range(6)}
        for batch in pk_batches(members, p=4, k=3, steps=20, seed=1):
            assert len(batch) == 12
            by_class = Counter(i // 10 for i in batch)
            assert len(by_class) == 4
            assert set(by_class.values()) == {3}

    def test_small_class_resamples(self):
        members = {0: [1], 1: [2, 3]}
        batch = next(pk_batches(members, p=2, k=4, steps=1, seed=0))
        assert len(batch) == 8

    def test_too_many_classes_requested(self):
        with pytest.raises(ValueError):
            next(pk_batches({0: [1]}, p=2, k=1, steps=1))


class TestTrainSet:
    def test_loads_labels_and_prompts(self, train_forge):
        ds = TrainSet(train_forge / "train.jsonl", train_forge, image_side=32)
        assert len(ds.records) == 12 * 5
        assert len(ds.class_ids) == 12
        assert ds.images.shape == (60, 3, 32, 32)
        for i, r in enumerate(ds.records):
            if not r["combo"]:
                assert ds.prompt_pairs[i] is None
                assert ds.pattern_labels[i].sum() == 0
            else:
                assert ds.pattern_labels[i].sum() >= 1
        # any assigned prompt pair shares the pattern set but not the source
        assigned = [(i, p) for i, p in enumerate(ds.prompt_pairs) if p]
        assert assigned
        for i, (oi, ri) in assigned:
            assert ds.records[ri]["source_id"] != ds.records[i]["source_id"]
            assert {c["pattern_id"] for c in ds.records[ri]["combo"]} == \
                   {c["pattern_id"] for c in ds.records[i]["combo"]}
            assert ds.records[oi]["source_id"] == ds.records[ri]["source_id"]

    def test_missing_provenance_rejected(self, tmp_path):
        bad = tmp_path / "train.jsonl"
        bad.write_text('{"id": "x", "path": "x.png"}\n')
        with pytest.raises(InputError):
            TrainSet(bad, tmp_path, image_side=32)


class TestTraining:
    def test_one_step_reduces_batch_loss(self, train_forge):
        ds = TrainSet(train_forge / "train.jsonl", train_forge, image_side=32)
        torch.manual_seed(0)
        model = StackerViT(ViTConfig(pattern_count=len(ds.pattern_vocab), **SMALL_CFG))
        weights = torch.nn.Parameter(torch.randn(len(ds.class_ids), 64) * 0.01)
        opt = torch.optim.AdamW(list(model.parameters()) + [weights], lr=1e-4)
        batch = list(range(0, 60, 2))
        x, cls, ptr = ds.batch(batch)

        def batch_loss():
            cf, pf = model(x)
            return combined_loss(
                cosface_loss(cf, cls, weights),
                bce_pattern_loss(torch.sigmoid(model.pattern_logits(pf)), ptr))

        before = batch_loss()
        opt.zero_grad()
        before.backward()
        opt.step()
        with torch.no_grad():
            after = batch_loss()
        assert after.item() < before.item()

    def test_overfit_self_retrieval(self, train_forge):
        ds = TrainSet(train_forge / "train.jsonl", train_forge, image_side=32)
        cfg = ViTConfig(pattern_count=len(ds.pattern_vocab), **SMALL_CFG)
        model, weights, losses = train(ds, cfg, LossConfig(), steps=600,
                                       batch_classes=8, batch_per_class=4,
                                       lr=1e-3, seed=0)
        assert losses[-1] < losses[0]
        # every training image retrieves its own class via the weight rows
        x, cls, _ = ds.batch(list(range(len(ds.records))))
        with torch.no_grad():
            feats, _ = model(x)
            cos = torch.nn.functional.normalize(feats, dim=1) @ \
                torch.nn.functional.normalize(weights, dim=1).T
        hits = (cos.argmax(dim=1) == cls).float().mean().item()
        assert hits == 1.0

    def test_checkpoint_roundtrip(self, train_forge, tmp_path):
        ds = TrainSet(train_forge / "train.jsonl", train_forge, image_side=32)
        cfg = ViTConfig(pattern_count=len(ds.pattern_vocab), **SMALL_CFG)
        model, _, losses = train(ds, cfg, steps=2, batch_classes=4,
                                 batch_per_class=2, seed=1)
        save_checkpoint(tmp_path / "ck.pt", model, ds, losses)
        loaded, blob = load_checkpoint(tmp_path / "ck.pt")
        assert blob["pattern_vocab"] == ds.pattern_vocab
        assert blob["losses"] == losses
        x, _, _ = ds.batch([0, 1])
        with torch.no_grad():
            a, _ = model(x)
            b, _ = loaded(x)
        assert torch.allclose(a, b)

    def test_vocab_mismatch_rejected(self, train_forge):
        ds = TrainSet(train_forge / "train.jsonl", train_forge, image_side=32)
        cfg = ViTConfig(pattern_count=len(ds.pattern_vocab) + 1, **SMALL_CFG)
        with pytest.raises(InputError):
            train(ds, cfg, steps=1)
