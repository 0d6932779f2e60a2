import math

import numpy as np
import pytest
from oracles import histogram_by_counting, quantile_by_sorting

from anglseg.brdf import LAMBERTIAN, TWO_LOBE, BrdfModel, Direction
from anglseg.histogram import (
    AngularHistogramFeature, HistogramConfig, build_histograms,
    class_reference_histograms, concentrated_range,
    nearest_candidate_classify, scene_histograms,
)
from anglseg.scene import SceneSpec, random_view_angles, render_stack
from anglseg.slic import SlicConfig, slic_segment

CFG = HistogramConfig()


class TestConcentratedRange:
    def test_uniform_quantiles(self):
        rng = np.random.default_rng(1)
        samples = rng.uniform(0, 1, size=100_000)
        lo, hi = concentrated_range(samples)
        assert abs(lo - 0.05) < 0.02
        assert abs(hi - 0.95) < 0.02

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            samples = rng.normal(0.4, 0.1, size=500)
            lo, hi = concentrated_range(samples)
            assert abs(lo - quantile_by_sorting(samples, 0.05)) < 1e-12
            assert abs(hi - quantile_by_sorting(samples, 0.95)) < 1e-12

    def test_degenerate_widening(self):
        lo, hi = concentrated_range(np.full(50, 0.37))
        assert lo == pytest.approx(0.37 - 1e-6)
        assert hi == pytest.approx(0.37 + 1e-6)
        assert hi > lo

    def test_permutation_invariant(self):
        rng = np.random.default_rng(3)
        samples = rng.random(1000)
        assert concentrated_range(samples) \
            == concentrated_range(samples[rng.permutation(1000)])

    def test_empty_errors(self):
        with pytest.raises(ValueError, match="no valid samples"):
            concentrated_range(np.array([]))


class TestBuildHistograms:
    def test_midpoint_one_hot(self):
        # coarse bin 3 of [0, 1.2] spans [0.225, 0.3); its midpoint
        mid = (3 + 0.5) * 1.2 / 16
        pools = [np.full(40, mid)]
        ids = np.zeros((4, 10), dtype=np.int64)
        feat = build_histograms(pools, ids, (0.2, 0.9))
        coarse = feat.per_superpixel[0, :16]
        assert coarse[3] == 1.0
        assert coarse.sum() == 1.0

    def test_normalization_blocks(self):
        rng = np.random.default_rng(5)
        pools = [rng.uniform(0, 1.4, size=rng.integers(1, 200))
                 for _ in range(30)]
        ids = np.zeros((1, 30), dtype=np.int64) + np.arange(30)
        feat = build_histograms(pools, ids.reshape(5, 6) % 30, (0.1, 0.8))
        for row in feat.per_superpixel:
            assert abs(row[:16].sum() - 1.0) <= 1e-6
            assert abs(row[16:].sum() - 1.0) <= 1e-6

    def test_empty_pool_uniform_flagged(self):
        feat = build_histograms([np.array([]), np.array([0.5])],
                                np.array([[0, 1]]), (0.2, 0.8))
        assert feat.empty_flags[0] and not feat.empty_flags[1]
        assert np.allclose(feat.per_superpixel[0, :16], 1.0 / 16)
        assert np.allclose(feat.per_superpixel[0, 16:], 1.0 / 16)
        assert feat.coverage[0] == 0 and feat.coverage[1] == 1

    def test_clamping_preserves_mass(self):
        # samples far outside both ranges land in edge bins, none dropped
        pools = [np.array([-5.0, -1.0, 0.001, 7.0])]
        feat = build_histograms(pools, np.zeros((1, 1), dtype=np.int64),
                                (0.4, 0.6))
        coarse = feat.per_superpixel[0, :16]
        fine = feat.per_superpixel[0, 16:]
        assert coarse[0] == pytest.approx(0.75)
        assert coarse[15] == pytest.approx(0.25)
        assert fine[0] == pytest.approx(0.75)
        assert fine[15] == pytest.approx(0.25)

    def test_matches_counting_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            samples = rng.uniform(-0.2, 1.5, size=rng.integers(1, 300))
            feat = build_histograms([samples],
                                    np.zeros((1, 1), dtype=np.int64),
                                    (0.3, 0.9))
            want_coarse = histogram_by_counting(samples, 0.0, 1.2, 16)
            want_fine = histogram_by_counting(samples, 0.3, 0.9, 16)
            assert np.array_equal(
                feat.per_superpixel[0, :16],
                (want_coarse / want_coarse.sum()).astype(np.float32))
            assert np.array_equal(
                feat.per_superpixel[0, 16:],
                (want_fine / want_fine.sum()).astype(np.float32))

    def test_merge_additivity(self):
        # unnormalized histogram of a union = sum of the parts
        rng = np.random.default_rng(9)
        for _ in range(10):
            a = rng.uniform(0, 1.3, size=rng.integers(1, 100))
            b = rng.uniform(0, 1.3, size=rng.integers(1, 100))
            fine = (0.2, 0.85)
            ids = np.zeros((1, 1), dtype=np.int64)
            fa = build_histograms([a], ids, fine).per_superpixel[0]
            fb = build_histograms([b], ids, fine).per_superpixel[0]
            fu = build_histograms([np.concatenate([a, b])], ids,
                                  fine).per_superpixel[0]
            na, nb = len(a), len(b)
            for sl in (slice(0, 16), slice(16, 32)):
                merged = (fa[sl] * na + fb[sl] * nb) / (na + nb)
                assert np.allclose(fu[sl], merged, atol=1e-6)

    def test_dense_map_consistency(self):
        rng = np.random.default_rng(11)
        pools = [rng.random(20) for _ in range(6)]
        ids = rng.integers(0, 6, size=(8, 9))
        feat = build_histograms(pools, ids, (0.2, 0.8))
        dense = feat.dense
        assert dense.shape == (8, 9, 32)
        for y in range(8):
            for x in range(9):
                assert np.array_equal(dense[y, x],
                                      feat.per_superpixel[ids[y, x]])

    def test_id_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            build_histograms([np.array([0.5])],
                             np.array([[0, 1]]), (0.2, 0.8))

    def test_illumination_covariance(self):
        # scaling samples and both ranges by s leaves the histogram alone
        rng = np.random.default_rng(13)
        samples = rng.uniform(0.05, 1.1, size=400)
        s = 3.7
        base = build_histograms([samples], np.zeros((1, 1), dtype=np.int64),
                                (0.2, 0.8), HistogramConfig())
        scaled = build_histograms(
            [samples * s], np.zeros((1, 1), dtype=np.int64),
            (0.2 * s, 0.8 * s),
            HistogramConfig(coarse_lo=0.0, coarse_hi=1.2 * s))
        assert np.array_equal(base.per_superpixel, scaled.per_superpixel)

    def test_view_permutation_invariance(self):
        from anglseg.scene import random_scene_spec
        spec = random_scene_spec(24, 24, 3, 6, seed=21, noise_sigma=0.01)
        from anglseg.brdf import default_materials
        stack = render_stack(spec, default_materials(3))
        spmap = slic_segment(stack.mean_image(), SlicConfig(num_superpixels=9))
        feat = scene_histograms(stack, spmap)
        perm = np.random.default_rng(0).permutation(6)
        stack.data = stack.data[perm]
        stack.valid = stack.valid[perm]
        feat2 = scene_histograms(stack, spmap)
        assert np.array_equal(feat.per_superpixel, feat2.per_superpixel)


def lambertian_vs_specular_fixture(noise_sigma, seed):
    """64x64 two-class scene built to separate by angular distribution."""
    table = [
        BrdfModel(0, LAMBERTIAN, albedo=0.5, name="flat"),
        BrdfModel(1, TWO_LOBE, albedo=0.2, specular_strength=0.15,
                  shininess=10, name="shiny"),
    ]
    from anglseg.scene import random_scene_spec
    spec = random_scene_spec(64, 64, 2, 8, seed=seed,
                             noise_sigma=noise_sigma)
    stack = render_stack(spec, table)
    return table, spec, stack


def superpixel_majority_labels(spmap, labels):
    out = np.zeros(spmap.count, dtype=np.int64)
    for k, (ys, xs) in enumerate(spmap.members):
        out[k] = np.bincount(labels[ys, xs]).argmax()
    return out


class TestNearestCandidate:
    def test_exact_reference_match(self):
        rng = np.random.default_rng(15)
        refs = rng.random((4, 32))
        refs /= refs.sum(axis=1, keepdims=True)
        got = nearest_candidate_classify(refs[[2, 0, 3]], refs)
        assert got.tolist() == [2, 0, 3]

    def test_tie_lowest_id(self):
        refs = np.stack([np.full(8, 0.125), np.full(8, 0.125)])
        got = nearest_candidate_classify(np.full((1, 8), 0.125), refs)
        assert got[0] == 0

    def test_candidate_permutation(self):
        rng = np.random.default_rng(17)
        refs = rng.random((5, 16))
        rows = rng.random((20, 16))
        base = nearest_candidate_classify(rows, refs)
        perm = np.array([3, 0, 4, 1, 2])
        permuted = nearest_candidate_classify(rows, refs[perm])
        assert np.array_equal(perm[permuted], base)

    def test_separability_noiseless(self):
        table, spec, stack = lambertian_vs_specular_fixture(0.0, seed=31)
        spmap = slic_segment(stack.mean_image(), SlicConfig())
        feat = scene_histograms(stack, spmap)
        fine = concentrated_range(stack.data[stack.valid])
        refs = class_reference_histograms(table, spec.sun_angle,
                                          spec.view_angles, fine)
        pred = nearest_candidate_classify(feat.per_superpixel, refs)
        truth = superpixel_majority_labels(spmap, stack.labels)
        accuracy = (pred == truth).mean()
        assert accuracy >= 0.99

    def test_separability_noisy(self):
        table, spec, stack = lambertian_vs_specular_fixture(0.02, seed=37)
        spmap = slic_segment(stack.mean_image(), SlicConfig())
        feat = scene_histograms(stack, spmap)
        fine = concentrated_range(stack.data[stack.valid])
        refs = class_reference_histograms(table, spec.sun_angle,
                                          spec.view_angles, fine,
                                          noise_sigma=0.02, seed=1)
        pred = nearest_candidate_classify(feat.per_superpixel, refs)
        truth = superpixel_majority_labels(spmap, stack.labels)
        assert (pred == truth).mean() >= 0.90


class TestRenderedBlockEntropy:
    def test_lambertian_one_hot_phong_spread(self):
        rng = np.random.default_rng(41)
        sun = Direction(0.4, 1.0)
        views = random_view_angles(8, rng)
        lamb = BrdfModel(0, LAMBERTIAN, albedo=0.5)
        phong = BrdfModel(0, TWO_LOBE, albedo=0.2, specular_strength=0.15,
                          shininess=10)

        def patch_feature(model):
            spec = SceneSpec(height=6, width=6, num_views=8,
                             material_map=np.zeros((6, 6), dtype=np.int32),
                             view_angles=views, sun_angle=sun, seed=3)
            stack = render_stack(spec, [model])
            fine = concentrated_range(
                np.concatenate([stack.data.ravel(), [0.0, 1.0]]))
            return build_histograms([stack.data.ravel()],
                                    np.zeros((6, 6), dtype=np.int64),
                                    fine).per_superpixel[0]

        def entropy(block):
            nz = block[block > 0]
            return float(-(nz * np.log(nz)).sum())

        row_l = patch_feature(lamb)
        assert (row_l[:16] == 1.0).sum() == 1
        assert (row_l[16:] == 1.0).sum() == 1
        row_p = patch_feature(phong)
        assert entropy(row_p[16:]) > entropy(row_l[16:])
