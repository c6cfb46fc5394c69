import numpy as np
import pytest
import torch

from imagestacker import (StackerViT, ViTConfig, export_features,
                          export_pool_pattern_features, read_apds, write_apds)
from imagestacker.export import CodecError
from imagestacker.train import InputError
from patternforge.descriptors import read_descriptors

from conftest import make_sources


@pytest.fixture
def model():
    torch.manual_seed(9)
    return StackerViT(ViTConfig(image_side=32, patch_side=8, depth=1,
                                width=32, heads=2, pattern_count=4)).eval()


def records_for(sources):
    return [{"id": s["id"], "path": s["path"]} for s in sources]


class TestApdsLocal:
    def test_roundtrip(self, tmp_path):
        ids = [f"a{i}" for i in range(7)]
        vecs = np.random.default_rng(0).normal(size=(7, 5)).astype(np.float32)
        write_apds(ids, vecs, tmp_path / "x.apds")
        rid, rvec = read_apds(tmp_path / "x.apds")
        assert rid == ids
        assert np.array_equal(rvec, vecs)

    def test_bad_magic(self, tmp_path):
        write_apds(["a"], np.ones((1, 2), np.float32), tmp_path / "x.apds")
        raw = bytearray((tmp_path / "x.apds").read_bytes())
        raw[:4] = b"NOPE"
        (tmp_path / "x.apds").write_bytes(bytes(raw))
        with pytest.raises(CodecError):
            read_apds(tmp_path / "x.apds")


class TestExport:
    def test_harness_reads_export(self, model, tmp_path):
        sources = make_sources(tmp_path / "img", 5, seed_base=50)
        export_features(model, records_for(sources), tmp_path,
                        tmp_path / "cls.apds", tmp_path / "ptr.apds")
        for name in ("cls.apds", "ptr.apds"):
            dset = read_descriptors(tmp_path / name)
            assert dset.ids == [s["id"] for s in sources]
            norms = np.linalg.norm(dset.vectors, axis=1)
            assert np.allclose(norms, 1.0, atol=1e-5)

    def test_gallery_export_ignores_pool(self, model, tmp_path):
        sources = make_sources(tmp_path / "img", 4, seed_base=60)
        export_features(model, records_for(sources), tmp_path,
                        tmp_path / "a.apds", tmp_path / "ap.apds")
        # empty per-record assignments = zero-shot = pseudo-prompt pass
        empty = {s["id"]: [] for s in sources}
        export_features(model, records_for(sources), tmp_path,
                        tmp_path / "b.apds", tmp_path / "bp.apds", assignment=empty)
        assert (tmp_path / "a.apds").read_bytes() == (tmp_path / "b.apds").read_bytes()
        assert (tmp_path / "ap.apds").read_bytes() == (tmp_path / "bp.apds").read_bytes()

    def test_self_pair_uses_source_image(self, model, tmp_path):
        sources = make_sources(tmp_path / "img", 2, seed_base=70)
        recs = records_for(sources)[:1]
        qid = recs[0]["id"]
        export_features(model, recs, tmp_path, tmp_path / "z.apds",
                        tmp_path / "zp.apds")
        export_features(model, recs, tmp_path, tmp_path / "s.apds",
                        tmp_path / "sp.apds", assignment={qid: [f"self:{qid}"]},
                        source_paths={qid: sources[1]["path"]})
        a = read_apds(tmp_path / "z.apds")[1]
        b = read_apds(tmp_path / "s.apds")[1]
        assert not np.array_equal(a, b)

    def test_self_pair_without_source_rejected(self, model, tmp_path):
        sources = make_sources(tmp_path / "img", 1, seed_base=80)
        recs = records_for(sources)
        with pytest.raises(InputError):
            export_features(model, recs, tmp_path, tmp_path / "x.apds",
                            tmp_path / "xp.apds",
                            assignment={recs[0]["id"]: [f"self:{recs[0]['id']}"]})

    def test_unknown_pool_pair_rejected(self, model, tmp_path):
        sources = make_sources(tmp_path / "img", 1, seed_base=90)
        recs = records_for(sources)
        with pytest.raises(InputError):
            export_features(model, recs, tmp_path, tmp_path / "x.apds",
                            tmp_path / "xp.apds",
                            assignment={recs[0]["id"]: ["p000-00"]})

    def test_pool_pattern_features(self, model, tmp_path):
        sources = make_sources(tmp_path / "img", 4, seed_base=95)
        entries = [{"pair_id": f"p{i}",
                    "original_path": sources[2 * i]["path"],
                    "replica_path": sources[2 * i + 1]["path"]} for i in range(2)]
        export_pool_pattern_features(model, entries, "/", tmp_path / "pool.apds")
        ids, vecs = read_apds(tmp_path / "pool.apds")
        assert ids == ["p0", "p1"]
        assert np.allclose(np.linalg.norm(vecs, axis=1), 1.0, atol=1e-5)
