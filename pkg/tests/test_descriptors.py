import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from patternforge import descriptors as D
from conftest import make_source_image


def unit_rows(rng, n, dim):
    v = rng.normal(size=(n, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v.astype(np.float32)


def renorm(v):
    # float32 storage perturbs norms; renormalize to satisfy the invariant
    v = v.astype(np.float64)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v.astype(np.float32)


class TestThumbnailDescriptor:
    def test_deterministic(self):
        img = make_source_image(5)
        assert np.array_equal(D.thumbnail_descriptor(img), D.thumbnail_descriptor(img.copy()))

    def test_unit_norm(self):
        v = D.thumbnail_descriptor(make_source_image(6))
        assert v.shape == (256,)
        assert abs(float(v @ v) - 1.0) < 1e-6

    def test_constant_image_maps_to_e1(self):
        img = np.full((32, 48, 3), 77, dtype=np.uint8)
        v = D.thumbnail_descriptor(img)
        assert v[0] == 1.0 and not np.any(v[1:])


class TestCodec:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        dset = D.DescriptorSet(ids=[f"v{i:04d}" for i in range(1000)],
                               vectors=unit_rows(rng, 1000, 64))
        p1 = tmp_path / "a.apds"
        p2 = tmp_path / "b.apds"
        D.write_descriptors(dset, p1)
        back = D.read_descriptors(p1)
        D.write_descriptors(back, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert back.ids == dset.ids
        assert np.array_equal(back.vectors, dset.vectors)

    def test_empty_set(self, tmp_path):
        dset = D.DescriptorSet(ids=[], vectors=np.zeros((0, 16), np.float32))
        p = tmp_path / "e.apds"
        D.write_descriptors(dset, p)
        back = D.read_descriptors(p)
        assert len(back) == 0 and back.dim == 16

    def test_corrupt_magic(self, tmp_path):
        p = tmp_path / "x.apds"
        D.write_descriptors(D.DescriptorSet(["a"], unit_rows(np.random.default_rng(1), 1, 8)), p)
        raw = bytearray(p.read_bytes())
        raw[:4] = b"NOPE"
        p.write_bytes(bytes(raw))
        with pytest.raises(D.CodecError, match="magic"):
            D.read_descriptors(p)

    def test_bad_version(self, tmp_path):
        p = tmp_path / "x.apds"
        D.write_descriptors(D.DescriptorSet(["a"], unit_rows(np.random.default_rng(1), 1, 8)), p)
        raw = bytearray(p.read_bytes())
        raw[4] = 9
        p.write_bytes(bytes(raw))
        with pytest.raises(D.CodecError, match="version"):
            D.read_descriptors(p)

    def test_truncation(self, tmp_path):
        p = tmp_path / "x.apds"
        D.write_descriptors(D.DescriptorSet(["a", "b"], unit_rows(np.random.default_rng(1), 2, 8)), p)
        p.write_bytes(p.read_bytes()[:-5])
        with pytest.raises(D.CodecError, match="payload"):
            D.read_descriptors(p)

    def test_id_count_mismatch(self, tmp_path):
        p = tmp_path / "x.apds"
        D.write_descriptors(D.DescriptorSet(["a", "b"], unit_rows(np.random.default_rng(1), 2, 8)), p)
        (tmp_path / "x.apds.ids").write_text("a\n")
        with pytest.raises(D.CodecError, match="ids"):
            D.read_descriptors(p)


def search_oracle(queries, gallery, k):
    """Independent double-loop top-k with the (score desc, id asc) tie rule."""
    out = {}
    for qi, qid in enumerate(queries.ids):
        scored = []
        for gi, gid in enumerate(gallery.ids):
            s = float(np.dot(queries.vectors[qi].astype(np.float64),
                             gallery.vectors[gi].astype(np.float64)))
            scored.append((gid, s))
        scored.sort(key=lambda t: (-t[1], t[0]))
        out[qid] = scored[:k]
    return out


class TestSearchTopk:
    def test_self_match(self):
        rng = np.random.default_rng(2)
        g = D.DescriptorSet([f"g{i}" for i in range(10)], unit_rows(rng, 10, 32))
        q = D.DescriptorSet(["q0"], g.vectors[3:4].copy())
        ml = D.search_topk(q, g, 1)
        gid, score = ml.matches["q0"][0]
        assert gid == "g3" and abs(score - 1.0) < 1e-6

    def test_orthogonal_toy(self):
        g = D.DescriptorSet(["a", "b"], np.array([[1, 0], [0, 1]], np.float32))
        q = D.DescriptorSet(["q"], np.array([[1, 0]], np.float32))
        ml = D.search_topk(q, g, 2)
        assert ml.matches["q"] == [("a", 1.0), ("b", 0.0)]

    def test_against_oracle(self):
        rng = np.random.default_rng(3)
        q = D.DescriptorSet([f"q{i}" for i in range(5)], unit_rows(rng, 5, 16))
        g = D.DescriptorSet([f"g{i:03d}" for i in range(100)], unit_rows(rng, 100, 16))
        ml = D.search_topk(q, g, 10)
        oracle = search_oracle(q, g, 10)
        for qid in q.ids:
            assert [g for g, _ in ml.matches[qid]] == [g for g, _ in oracle[qid]]

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(2, 30), st.integers(1, 10))
    def test_oracle_property(self, seed, nq, ng, k):
        rng = np.random.default_rng(seed)
        q = D.DescriptorSet([f"q{i}" for i in range(nq)], unit_rows(rng, nq, 8))
        g = D.DescriptorSet([f"g{i:02d}" for i in range(ng)], unit_rows(rng, ng, 8))
        ml = D.search_topk(q, g, k)
        oracle = search_oracle(q, g, k)
        for qid in q.ids:
            assert [x for x, _ in ml.matches[qid]] == [x for x, _ in oracle[qid]]

    def test_tie_determinism_under_permutation(self):
        # duplicated gallery rows force exact score ties
        rng = np.random.default_rng(4)
        base = unit_rows(rng, 3, 8)
        vecs = np.vstack([base, base[::-1]])
        ids = ["g0", "g1", "g2", "t2", "t1", "t0"]
        q = D.DescriptorSet(["q"], base[1:2].copy())
        ml1 = D.search_topk(D.DescriptorSet(["q"], q.vectors), D.DescriptorSet(ids, vecs), 6)
        perm = [5, 3, 0, 4, 2, 1]
        ml2 = D.search_topk(D.DescriptorSet(["q"], q.vectors),
                            D.DescriptorSet([ids[i] for i in perm], vecs[perm]), 6)
        assert ml1.matches["q"] == ml2.matches["q"]

    def test_dim_mismatch(self):
        q = D.DescriptorSet(["q"], np.array([[1, 0]], np.float32))
        g = D.DescriptorSet(["g"], np.array([[1, 0, 0]], np.float32))
        with pytest.raises(D.ShapeError):
            D.search_topk(q, g, 1)


def make_ml(rows):
    return D.MatchList(matches={q: sorted(lst, key=lambda t: (-t[1], t[0]))
                                for q, lst in rows.items()})


class TestAggregateMax:
    def test_single_list_identity(self):
        ml = make_ml({"q": [("a", 0.5), ("b", 0.2)]})
        assert D.aggregate_max([ml]).matches == ml.matches

    def test_max_rule(self):
        m1 = make_ml({"q": [("a", 0.2), ("b", 0.1)]})
        m2 = make_ml({"q": [("a", 0.7), ("b", 0.05)]})
        out = D.aggregate_max([m1, m2])
        assert dict(out.matches["q"]) == {"a": 0.7, "b": 0.1}

    def test_idempotent_and_order_insensitive(self):
        rng = np.random.default_rng(5)
        mls = []
        for _ in range(3):
            mls.append(make_ml({f"q{i}": [(f"g{j}", float(rng.uniform(-1, 1)))
                                          for j in range(6)] for i in range(4)}))
        once = D.aggregate_max(mls)
        assert D.aggregate_max([once]).matches == once.matches
        assert D.aggregate_max(mls[::-1]).matches == once.matches

    def test_against_scalar_oracle(self):
        rng = np.random.default_rng(6)
        mls = [make_ml({f"q{i}": [(f"g{j}", float(rng.uniform(-1, 1)))
                                  for j in range(5)] for i in range(3)}) for _ in range(3)]
        out = D.aggregate_max(mls)
        for qid, lst in out.matches.items():
            for gid, score in lst:
                expect = max(dict(ml.matches[qid])[gid] for ml in mls)
                assert score == expect

    def test_inconsistent_ids(self):
        m1 = make_ml({"q": [("a", 0.1)]})
        m2 = make_ml({"r": [("a", 0.1)]})
        with pytest.raises(D.ShapeError):
            D.aggregate_max([m1, m2])


class TestMatchCSV:
    def test_roundtrip(self, tmp_path):
        ml = make_ml({"q1": [("a", 0.123456789), ("b", -0.5)],
                      "q0": [("c", 1.0), ("a", 0.0)]})
        p = tmp_path / "m.csv"
        D.write_matches(ml, p)
        back = D.read_matches(p)
        for q in ml.matches:
            got = back.matches[q]
            for (g1, s1), (g2, s2) in zip(ml.matches[q], got):
                assert g1 == g2 and abs(s1 - s2) < 1e-8

    def test_bad_header(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("nope\n")
        with pytest.raises(D.CodecError):
            D.read_matches(p)


class TestDescriptorSetInvariants:
    def test_rejects_non_unit(self):
        with pytest.raises(D.ShapeError):
            D.DescriptorSet(["a"], np.array([[2.0, 0.0]], np.float32))

    def test_rejects_nan(self):
        with pytest.raises(D.ShapeError):
            D.DescriptorSet(["a"], np.array([[np.nan, 1.0]], np.float32))

    def test_rejects_duplicate_ids(self):
        v = np.array([[1, 0], [1, 0]], np.float32)
        with pytest.raises(D.ShapeError):
            D.DescriptorSet(["a", "a"], v)
