import math

import numpy as np
import pytest

from comca.cachebuild import Cache, CacheEntry, build_image_cache
from comca.embeddings import EmbeddingMatrix
from comca.errors import ComcaWarning, EmptyCache, NotStochastic, PoolExhausted, ShapeMismatch
from comca.labeling import LabelMatrix, make_labels, raw_soft_labels
from comca.scoring import (
    HyperParams,
    ScoreMatrix,
    attr_given_object_from_compat,
    comca_cache_scores,
    eta_c,
    fuse_final,
    iap_scores,
    image_based_scores,
    load_scores,
    save_scores,
    softmax_rows,
    tip_cache_scores,
    zero_shot_scores,
)

from conftest import make_matrix, unit_rows
from oracles import (
    comca_scores_loop,
    fuse_loop,
    similarity_loop,
    tip_scores_loop,
)


def image_matrix(rows, prefix="x"):
    return EmbeddingMatrix(ids=[f"{prefix}{i}" for i in range(len(rows))],
                           data=np.asarray(rows, dtype=float), kind="image")


def cache_from(vectors, attrs, n_attributes):
    entries = [CacheEntry(f"c{i}", np.asarray(v, dtype=float), a, 0)
               for i, (v, a) in enumerate(zip(vectors, attrs))]
    return Cache(entries=entries, shots_per_attribute=1, seed=0,
                 n_attributes=n_attributes, strategy="brute_force")


def blended(values):
    return LabelMatrix(values=np.asarray(values, dtype=float),
                       variant="blended", alpha=0.0)


class TestEtaC:
    def test_unit_similarity(self):
        assert eta_c(1.0, 1.0) == pytest.approx(1.0)

    def test_zero_similarity(self):
        assert eta_c(0.0, 1.0) == pytest.approx(math.exp(-1.0))

    def test_half_with_beta_two(self):
        assert eta_c(0.5, 2.0) == pytest.approx(math.exp(-1.0))

    def test_paper_form_constant_factor(self):
        # exp(1 + z) = e^2 * exp(-(1 - z)) at beta = 1
        for z in (-0.5, 0.0, 0.7):
            assert eta_c(z, 1.0, "paper") == pytest.approx(
                math.e**2 * eta_c(z, 1.0, "tip"))


class TestZeroShot:
    def test_identical(self):
        img = image_matrix([[1.0, 0.0]])
        prompts = make_matrix(np.random.default_rng(0), 2, 2, kind="text")
        prompts.data[:] = np.eye(2)
        out = zero_shot_scores(img, prompts)
        np.testing.assert_allclose(out.values, [[1.0, 0.0]])
        assert out.kind == "zero_shot"

    def test_matches_scalar_loop(self, rng):
        imgs = make_matrix(rng, 3, 5, prefix="i")
        prompts = make_matrix(rng, 4, 5, kind="text", prefix="p")
        got = zero_shot_scores(imgs, prompts).values
        want = similarity_loop(imgs.data.tolist(), prompts.data.tolist())
        np.testing.assert_allclose(got, want, atol=1e-6)


class TestTipScores:
    def test_single_entry(self):
        cache = cache_from([[1.0, 0.0]], [0], 2)
        img = image_matrix([[1.0, 0.0]])
        out = tip_cache_scores(img, cache, beta=1.0)
        np.testing.assert_allclose(out.values, [[1.0, 0.0]])

    def test_two_identical_entries_sum(self):
        cache = cache_from([[1.0, 0.0], [1.0, 0.0]], [0, 0], 1)
        img = image_matrix([[1.0, 0.0]])
        out = tip_cache_scores(img, cache, beta=1.0)
        np.testing.assert_allclose(out.values, [[2.0]])

    def test_matches_scalar_loop(self, rng):
        vecs = unit_rows(rng, 4, 6)
        attrs = [0, 1, 1, 2]
        cache = cache_from(vecs.tolist(), attrs, 3)
        imgs = make_matrix(rng, 5, 6)
        got = tip_cache_scores(imgs, cache, beta=1.3).values
        want = tip_scores_loop(imgs.data.tolist(), vecs.tolist(), attrs, 3, 1.3)
        np.testing.assert_allclose(got, want, atol=1e-6)

    def test_empty_cache(self):
        cache = Cache(entries=[], shots_per_attribute=1, seed=0,
                      n_attributes=1, strategy="brute_force")
        with pytest.raises(EmptyCache):
            tip_cache_scores(image_matrix([[1.0, 0.0]]), cache, 1.0)


class TestComcaScores:
    def test_one_hot_label_includes_eta_of_zero(self):
        # eta applies to the product, so a zero label contributes e^-1
        cache = cache_from([[1.0, 0.0]], [0], 2)
        labels = blended([[1.0, 0.0]])
        img = image_matrix([[1.0, 0.0]])
        out = comca_cache_scores(img, cache, labels, beta=1.0)
        np.testing.assert_allclose(out.values,
                                   [[1.0, math.exp(-1.0)]], atol=1e-12)

    def test_zero_cosines_constant_field(self, rng):
        d = 4
        cache_vecs = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]
        cache = cache_from(cache_vecs, [0, 1], 2)
        labels = blended(rng.uniform(0, 1, size=(2, 2)))
        img = image_matrix([[0.0, 0.0, 1.0, 0.0]])
        out = comca_cache_scores(img, cache, labels, beta=1.0)
        np.testing.assert_allclose(out.values, 2.0 * math.exp(-1.0),
                                   atol=1e-12)

    def test_matches_scalar_loop(self, rng):
        vecs = unit_rows(rng, 3, 5)
        cache = cache_from(vecs.tolist(), [0, 1, 0], 2)
        labels = blended(rng.uniform(0, 1, size=(3, 2)))
        imgs = make_matrix(rng, 4, 5)
        got = comca_cache_scores(imgs, cache, labels, beta=0.8).values
        want = comca_scores_loop(imgs.data.tolist(), vecs.tolist(),
                                 labels.values.tolist(), 0.8)
        np.testing.assert_allclose(got, want, atol=1e-6)

    def test_eq10_inside_form(self, rng):
        vecs = unit_rows(rng, 3, 5)
        cache = cache_from(vecs.tolist(), [0, 1, 0], 2)
        labels = blended(rng.uniform(0, 1, size=(3, 2)))
        imgs = make_matrix(rng, 2, 5)
        got = comca_cache_scores(imgs, cache, labels, beta=0.8,
                                 eq10_form="inside").values
        want = comca_scores_loop(imgs.data.tolist(), vecs.tolist(),
                                 labels.values.tolist(), 0.8,
                                 eq10_form="inside")
        np.testing.assert_allclose(got, want, atol=1e-6)

    def test_alpha_zero_differs_from_tip_by_constant_field(self):
        # 2-entry toy: comca with one-hot labels adds eta(0) for every
        # entry whose label is not the scored attribute
        vecs = [[1.0, 0.0], [0.0, 1.0]]
        cache = cache_from(vecs, [0, 1], 2)
        img = image_matrix([[0.6, 0.8]])
        labels = blended([[1.0, 0.0], [0.0, 1.0]])
        comca = comca_cache_scores(img, cache, labels, beta=1.0).values
        tip = tip_cache_scores(img, cache, beta=1.0).values
        np.testing.assert_allclose(comca - tip, math.exp(-1.0), atol=1e-12)

    def test_label_shape_mismatch(self):
        cache = cache_from([[1.0, 0.0]], [0], 2)
        with pytest.raises(ShapeMismatch):
            comca_cache_scores(image_matrix([[1.0, 0.0]]), cache,
                               blended([[1.0, 0.0], [0.0, 1.0]]), 1.0)


class TestFuseFinal:
    def _pair(self, cache_vals, clip_vals):
        ids = [f"x{i}" for i in range(len(cache_vals))]
        names = [f"a{j}" for j in range(len(cache_vals[0]))]
        return (ScoreMatrix(ids, names, np.array(cache_vals), "cache_comca"),
                ScoreMatrix(ids, names, np.array(clip_vals), "zero_shot"))

    def test_lambda_zero_is_eta_a_of_clip(self):
        cache_sm, clip_sm = self._pair([[5.0, 1.0]], [[0.2, 0.4]])
        out = fuse_final(cache_sm, clip_sm, lam=0.0)
        want = fuse_loop([[0.0, 0.0]], [[0.2, 0.4]], 0.0)
        np.testing.assert_allclose(out.values, want, atol=1e-12)

    def test_equal_row_uniform(self):
        cache_sm, clip_sm = self._pair([[1.0, 1.0, 1.0]], [[0.5, 0.5, 0.5]])
        out = fuse_final(cache_sm, clip_sm, lam=2.0)
        np.testing.assert_allclose(out.values, 1.0 / 3.0)

    def test_hand_case_two_four(self):
        cache_sm, clip_sm = self._pair([[2.0, 4.0]], [[0.0, 0.0]])
        out = fuse_final(cache_sm, clip_sm, lam=1.0)
        np.testing.assert_allclose(out.values, [[0.37754, 0.62246]], atol=1e-5)

    def test_none_mode_identity(self):
        cache_sm, clip_sm = self._pair([[1.0, 2.0]], [[0.3, -0.1]])
        out = fuse_final(cache_sm, clip_sm, lam=0.0, norm_mode="none")
        np.testing.assert_array_equal(out.values, clip_sm.values)

    def test_min_max_mode(self):
        cache_sm, clip_sm = self._pair([[0.0, 0.0, 0.0]], [[1.0, 3.0, 2.0]])
        out = fuse_final(cache_sm, clip_sm, lam=1.0, norm_mode="min_max")
        np.testing.assert_allclose(out.values, [[0.0, 1.0, 0.5]])

    def test_degenerate_row_shifted_not_crashed(self):
        cache_sm, clip_sm = self._pair([[0.0, 0.0]], [[-0.5, -0.2]])
        out = fuse_final(cache_sm, clip_sm, lam=1.0)
        assert np.all(np.isfinite(out.values))
        np.testing.assert_allclose(out.values.sum(axis=1), 1.0, atol=1e-9)
        assert out.values[0, 1] > out.values[0, 0]

    def test_rows_sum_to_one(self, rng):
        cache_vals = rng.uniform(0, 5, size=(6, 4))
        clip_vals = rng.uniform(-1, 1, size=(6, 4))
        cache_sm, clip_sm = self._pair(cache_vals.tolist(), clip_vals.tolist())
        out = fuse_final(cache_sm, clip_sm, lam=1.17)
        np.testing.assert_allclose(out.values.sum(axis=1), 1.0, atol=1e-9)

    def test_argmax_preserved(self, rng):
        cache_vals = rng.uniform(0, 5, size=(20, 6))
        clip_vals = rng.uniform(-1, 1, size=(20, 6))
        cache_sm, clip_sm = self._pair(cache_vals.tolist(), clip_vals.tolist())
        z = 1.17 * cache_vals + clip_vals
        out = fuse_final(cache_sm, clip_sm, lam=1.17)
        np.testing.assert_array_equal(out.values.argmax(axis=1),
                                      z.argmax(axis=1))

    def test_matches_scalar_loop_all_modes(self, rng):
        cache_vals = rng.uniform(0, 3, size=(5, 4))
        clip_vals = rng.uniform(-1, 1, size=(5, 4))
        cache_sm, clip_sm = self._pair(cache_vals.tolist(), clip_vals.tolist())
        for mode in ("none", "min_max", "max_softmax"):
            got = fuse_final(cache_sm, clip_sm, 1.17, mode).values
            want = fuse_loop(cache_vals.tolist(), clip_vals.tolist(), 1.17,
                             mode)
            np.testing.assert_allclose(got, want, atol=1e-6)

    def test_attribute_permutation_equivariance(self, rng):
        cache_vals = rng.uniform(0, 3, size=(4, 5))
        clip_vals = rng.uniform(-1, 1, size=(4, 5))
        cache_sm, clip_sm = self._pair(cache_vals.tolist(), clip_vals.tolist())
        out = fuse_final(cache_sm, clip_sm, 1.17).values
        perm = [3, 1, 4, 0, 2]
        cache_p, clip_p = self._pair(cache_vals[:, perm].tolist(),
                                     clip_vals[:, perm].tolist())
        out_p = fuse_final(cache_p, clip_p, 1.17).values
        np.testing.assert_allclose(out_p, out[:, perm], atol=1e-12)


class TestIap:
    def test_certain_object(self):
        obj = ScoreMatrix(["x0"], ["o0", "o1"], np.array([[1.0, 0.0]]),
                          "cache_tip")
        p_attr = np.array([[0.3, 0.7], [0.5, 0.5]])
        out = iap_scores(obj, p_attr)
        np.testing.assert_allclose(out.values, [[0.3, 0.7]])
        assert out.kind == "iap"

    def test_uniform_over_symmetric_rows(self):
        obj = ScoreMatrix(["x0"], ["o0", "o1"], np.array([[0.5, 0.5]]),
                          "cache_tip")
        p_attr = np.array([[1.0, 0.0], [0.0, 1.0]])
        out = iap_scores(obj, p_attr)
        np.testing.assert_allclose(out.values, [[0.5, 0.5]])

    def test_hand_matrix_product(self):
        obj = ScoreMatrix(["x0"], ["o0", "o1"], np.array([[0.25, 0.75]]),
                          "cache_tip")
        p_attr = np.array([[0.8, 0.2], [0.4, 0.6]])
        out = iap_scores(obj, p_attr)
        np.testing.assert_allclose(out.values, [[0.5, 0.5]], atol=1e-12)

    def test_not_stochastic_rejected(self):
        obj = ScoreMatrix(["x0"], ["o0", "o1"], np.array([[0.7, 0.7]]),
                          "cache_tip")
        with pytest.raises(NotStochastic):
            iap_scores(obj, np.array([[1.0, 0.0], [0.0, 1.0]]))

    def test_attr_given_object_from_compat(self):
        phi = np.array([[3.0, 0.0], [1.0, 0.0]])
        p = attr_given_object_from_compat(phi)
        np.testing.assert_allclose(p, [[0.75, 0.25], [0.5, 0.5]])
        np.testing.assert_allclose(p.sum(axis=1), 1.0)


class TestImageBased:
    def test_symmetric_pool_gives_uniform(self):
        pool = image_matrix([[1.0, 0.0]], prefix="p")
        attr_text = EmbeddingMatrix(
            ids=["a0", "a1"],
            data=np.array([[0.6, 0.8], [0.6, -0.8]]), kind="text")
        # single entry with symmetric similarities: standardization is
        # undefined, the softmax-only fallback warns and yields uniform
        with pytest.warns(ComcaWarning):
            row = image_based_scores(np.array([1.0, 0.0]), pool, k=1,
                                     attr_text=attr_text, beta=1.0)
        np.testing.assert_allclose(row, [0.5, 0.5], atol=1e-12)

    def test_k_larger_than_pool(self):
        pool = image_matrix([[1.0, 0.0]], prefix="p")
        attr_text = make_matrix(np.random.default_rng(0), 2, 2, kind="text")
        with pytest.raises(PoolExhausted):
            image_based_scores(np.array([1.0, 0.0]), pool, k=2,
                               attr_text=attr_text, beta=1.0)

    def test_matches_composed_ops(self, rng):
        pool = make_matrix(rng, 10, 6, prefix="p")
        attr_text = make_matrix(rng, 3, 6, kind="text", prefix="a")
        test_vec = unit_rows(rng, 1, 6)[0]
        params = HyperParams()
        got = image_based_scores(test_vec, pool, k=4, attr_text=attr_text,
                                 beta=1.0, params=params)

        cache = build_image_cache(test_vec, pool, 4)
        raw = raw_soft_labels(cache, attr_text)
        labels = make_labels(cache, attr_text, alpha=1.0)
        want_cache = comca_scores_loop([test_vec.tolist()],
                                       cache.embedding_matrix.tolist(),
                                       labels.values.tolist(), 1.0)
        want_clip = similarity_loop([test_vec.tolist()],
                                    attr_text.data.tolist())
        want = fuse_loop(want_cache, want_clip, params.lam)[0]
        np.testing.assert_allclose(got, want, atol=1e-6)
        assert raw.shape == (4, 3)


class TestHyperParams:
    def test_defaults(self):
        p = HyperParams()
        assert p.lam == 1.17
        assert p.beta == 1.0
        assert p.alpha == 0.6
        assert p.k == 16
        assert p.norm_mode == "max_softmax"
        assert p.eta_form == "tip"
        assert p.eq10_form == "outside"

    def test_validation(self):
        with pytest.raises(ValueError):
            HyperParams(lam=-0.1)
        with pytest.raises(ValueError):
            HyperParams(alpha=1.5)
        with pytest.raises(ValueError):
            HyperParams(norm_mode="bogus")


class TestSerialization:
    def test_round_trip(self, rng, tmp_path):
        sm = ScoreMatrix(["x0", "x1"], ["a", "b", "c"],
                         rng.normal(size=(2, 3)), "fused")
        path = tmp_path / "scores.json"
        save_scores(sm, path)
        back = load_scores(path)
        np.testing.assert_array_equal(back.values, sm.values)
        assert back.instance_ids == sm.instance_ids
        assert back.attribute_names == sm.attribute_names
        assert back.kind == "fused"

    def test_full_float64_precision(self, tmp_path):
        values = np.array([[1.0 / 3.0, math.pi]])
        sm = ScoreMatrix(["x"], ["a", "b"], values, "zero_shot")
        save_scores(sm, tmp_path / "s.json")
        back = load_scores(tmp_path / "s.json")
        assert back.values[0, 0] == values[0, 0]
        assert back.values[0, 1] == values[0, 1]


def test_softmax_rows_stable_for_large_logits():
    out = softmax_rows(np.array([[1000.0, 1000.0, 999.0]]))
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out.sum(), 1.0)
