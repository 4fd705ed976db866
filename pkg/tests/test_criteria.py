import math

import numpy as np
import pytest

from cornercase.criteria import (
    FEATURE_NAMES,
    DegenerateClusterError,
    KdeConfig,
    MaskDegenerateError,
    SingletonClusterError,
    box_criteria,
    class_score_criteria,
    combined_criteria,
    compute_criteria,
    feature_vector,
    mask_criteria,
)
from cornercase.geometry import BBox, iou_box
from helpers import make_cluster, rect_mask
from oracles import (
    mask_to_pixels,
    naive_box_criteria,
    naive_class_criteria,
    naive_mask_criteria,
)


def random_cluster(rng, n_members=None, k=None, canvas=24):
    """Random cluster with boxes, score rows, and non-empty similar masks."""
    n = n_members or int(rng.integers(2, 8))
    k = k or int(rng.integers(2, 6))
    # Base rectangle, jittered per member so most pixels agree across members.
    x0, y0 = rng.integers(1, canvas // 2, size=2)
    x1 = int(x0 + rng.integers(4, canvas // 2))
    y1 = int(y0 + rng.integers(4, canvas // 2))
    boxes, scores, masks = [], [], []
    for _ in range(n):
        jitter = rng.normal(0, 0.8, size=4)
        bx0, by0 = x0 + jitter[0], y0 + jitter[1]
        bx1 = max(bx0 + 1.0, x1 + jitter[2])
        by1 = max(by0 + 1.0, y1 + jitter[3])
        boxes.append((bx0, by0, bx1, by1))
        row = rng.random(k) + 0.05
        scores.append(list(row / row.sum()))
        dy0, dy1, dx0, dx1 = rng.integers(-1, 2, size=4)
        masks.append(
            rect_mask(
                canvas,
                canvas,
                max(0, y0 + dy0),
                min(canvas, y1 + dy1),
                max(0, x0 + dx0),
                min(canvas, x1 + dx1),
            )
        )
    return make_cluster(boxes, scores=scores, masks=masks), boxes, scores, masks


class TestClassScoreCriteria:
    def test_hand_example(self):
        cluster = make_cluster(
            [(0, 0, 10, 10), (0, 0, 10, 10)],
            scores=[[0.8, 0.2], [0.9, 0.1]],
        )
        crit = class_score_criteria(cluster)
        assert crit.k_max == 0 and crit.k_2nd == 1
        assert crit.mean_max == pytest.approx(0.85, abs=1e-12)
        assert crit.std_max == pytest.approx(0.07071068, abs=1e-7)
        assert crit.mean_2nd == pytest.approx(0.15, abs=1e-12)
        assert crit.std_2nd == pytest.approx(0.07071068, abs=1e-7)

    def test_tie_prefers_lowest_index(self):
        cluster = make_cluster(
            [(0, 0, 5, 5)] * 2,
            scores=[[0.4, 0.4, 0.2], [0.4, 0.4, 0.2]],
        )
        crit = class_score_criteria(cluster)
        assert crit.k_max == 0 and crit.k_2nd == 1

    def test_singleton_rejected(self):
        with pytest.raises(SingletonClusterError):
            class_score_criteria(make_cluster([(0, 0, 5, 5)]))

    def test_matches_naive(self, rng):
        for _ in range(50):
            cluster, _, scores, _ = random_cluster(rng)
            got = class_score_criteria(cluster)
            want = naive_class_criteria(scores)
            assert got.k_max == want["k_max"]
            assert got.k_2nd == want["k_2nd"]
            assert got.mean_max == pytest.approx(want["mean_max"], rel=1e-12)
            assert got.std_max == pytest.approx(want["std_max"], rel=1e-12, abs=1e-12)
            assert got.mean_2nd == pytest.approx(want["mean_2nd"], rel=1e-12)
            assert got.std_2nd == pytest.approx(want["std_2nd"], rel=1e-12, abs=1e-12)


class TestBoxCriteria:
    def test_hand_example(self):
        cluster = make_cluster([(0, 0, 10, 10), (0, 0, 10, 14)])
        crit = box_criteria(cluster)
        assert crit.mean_box.as_tuple() == pytest.approx((0, 0, 10, 12))
        sd = math.sqrt(2) * 2  # stdev of {10, 14}
        # sigma order: x1, y1, x2, y2, c_x, c_y, w, h
        assert crit.sigma == pytest.approx(
            [0, 0, 0, sd / 12, 0, sd / 2 / 12, 0, sd / 12], abs=1e-12
        )
        # IoUs against the mean box: 100/120 and 120/140
        assert crit.iou_values == pytest.approx([5 / 6, 6 / 7], abs=1e-12)
        assert crit.iou_mean == pytest.approx(71 / 84, abs=1e-12)

    def test_identical_boxes(self):
        cluster = make_cluster([(1, 2, 7, 9)] * 3)
        crit = box_criteria(cluster)
        assert crit.sigma == pytest.approx(np.zeros(8), abs=1e-15)
        assert crit.iou_mean == 1.0
        assert crit.iou_std == 0.0

    def test_degenerate_mean_box(self):
        # Mean box collapses to zero width.
        cluster = make_cluster([(0, 0, 0, 10), (5, 0, 5, 10)])
        with pytest.raises(DegenerateClusterError):
            box_criteria(cluster)

    def test_matches_naive(self, rng):
        for _ in range(50):
            cluster, boxes, _, _ = random_cluster(rng)
            got = box_criteria(cluster)
            want = naive_box_criteria(boxes)
            assert got.mean_box.as_tuple() == pytest.approx(want["mean_box"], rel=1e-12)
            assert got.sigma == pytest.approx(want["sigma"], rel=1e-12, abs=1e-12)
            assert got.iou_mean == pytest.approx(want["iou_mean"], rel=1e-12)
            assert got.iou_std == pytest.approx(want["iou_std"], rel=1e-12, abs=1e-12)


class TestMaskCriteria:
    def test_hand_example(self):
        m1 = rect_mask(20, 20, 0, 10, 0, 10)  # 100 px
        m2 = rect_mask(20, 20, 0, 10, 0, 8)  # 80 px
        cluster = make_cluster([(0, 0, 10, 10)] * 2, masks=[m1, m2])
        crit = mask_criteria(cluster)
        # Majority mask is the 80-px intersection: x in [0,8), y in [0,10)
        assert crit.mean_mask_box.as_tuple() == pytest.approx((3.5, 4.5, 8, 10))
        sd1 = math.sqrt(2) / 2  # stdev of {4.5, 3.5}
        sd2 = math.sqrt(2)  # stdev of {10, 8}
        assert crit.sigma_box == pytest.approx(
            [sd1 / 8, 0, sd2 / 8, 0], abs=1e-12
        )
        assert crit.iou_values == pytest.approx([0.8, 1.0], abs=1e-12)
        assert crit.iou_mean == pytest.approx(0.9, abs=1e-12)
        assert crit.iou_std == pytest.approx(0.14142136, abs=1e-7)
        assert crit.area_mean == pytest.approx(90.0)
        assert crit.area_std_norm == pytest.approx(math.sqrt(2) * 10 / 90, abs=1e-12)

    def test_strict_majority_threshold(self):
        # With two members, a pixel in exactly one of them is at 0.5 and
        # must be excluded.
        m1 = rect_mask(6, 6, 0, 3, 0, 3)
        m2 = rect_mask(6, 6, 0, 3, 0, 4)
        crit = mask_criteria(make_cluster([(0, 0, 3, 3)] * 2, masks=[m1, m2]))
        assert crit.mean_mask.sum() == 9

    def test_missing_mask_rejected(self):
        cluster = make_cluster([(0, 0, 3, 3)] * 2,
                               masks=[rect_mask(4, 4, 0, 3, 0, 3), None])
        with pytest.raises(MaskDegenerateError):
            mask_criteria(cluster)

    def test_empty_member_mask_rejected(self):
        cluster = make_cluster(
            [(0, 0, 3, 3)] * 2,
            masks=[rect_mask(4, 4, 0, 3, 0, 3), np.zeros((4, 4), dtype=bool)],
        )
        with pytest.raises(MaskDegenerateError):
            mask_criteria(cluster)

    def test_empty_majority_mask_rejected(self):
        # Disjoint member masks: no pixel reaches a strict majority.
        m1 = rect_mask(8, 8, 0, 3, 0, 3)
        m2 = rect_mask(8, 8, 4, 7, 4, 7)
        cluster = make_cluster([(0, 0, 3, 3)] * 2, masks=[m1, m2])
        with pytest.raises(MaskDegenerateError):
            mask_criteria(cluster)

    def test_matches_naive(self, rng):
        for _ in range(50):
            cluster, _, _, masks = random_cluster(rng)
            got = mask_criteria(cluster)
            want = naive_mask_criteria([mask_to_pixels(m) for m in masks])
            assert mask_to_pixels(got.mean_mask) == want["mean_mask"]
            assert got.mean_mask_box.as_tuple() == pytest.approx(
                want["mean_box"], rel=1e-12
            )
            assert got.sigma_box == pytest.approx(want["sigma"], rel=1e-12, abs=1e-12)
            assert got.iou_mean == pytest.approx(want["iou_mean"], rel=1e-12)
            assert got.iou_std == pytest.approx(want["iou_std"], rel=1e-12, abs=1e-12)
            assert got.area_std_norm == pytest.approx(
                want["area_std_norm"], rel=1e-12
            )


class TestCombinedCriteria:
    def test_iou_mis_exact_agreement(self):
        # Boxes placed exactly on the pixel extent of identical masks give
        # a perfect box/mask agreement.
        mask = rect_mask(10, 10, 2, 5, 3, 7)
        cluster = make_cluster(
            [(3, 2, 7, 5), (3, 2, 7, 5), (3, 2, 7, 5)], masks=[mask] * 3
        )
        crit = compute_criteria(cluster)
        assert crit.combined.iou_mis == pytest.approx(1.0, abs=1e-12)
        assert crit.combined.kl_b_m == pytest.approx(0.0, abs=1e-9)
        assert crit.combined.js == pytest.approx(0.0, abs=1e-9)
        assert crit.combined.emd == pytest.approx(0.0, abs=1e-12)

    def test_divergences_consistent_with_kde_inputs(self, rng):
        cluster, _, _, _ = random_cluster(rng)
        crit = compute_criteria(cluster)
        box_c = box_criteria(cluster)
        mask_c = mask_criteria(cluster)
        comb = combined_criteria(box_c, mask_c)
        assert crit.combined.kl_b_m == comb.kl_b_m
        assert crit.combined.kl_m_b == comb.kl_m_b
        assert crit.combined.js == comb.js
        assert crit.combined.emd == comb.emd
        expected_mis = iou_box(box_c.mean_box,
                               mask_c.mean_mask_box.pixel_extent())
        assert crit.combined.iou_mis == expected_mis


class TestFeatureVector:
    def test_shape_and_order(self, rng):
        cluster, _, scores, _ = random_cluster(rng)
        vec = feature_vector(cluster)
        assert vec.values.shape == (26,)
        assert len(FEATURE_NAMES) == 26
        cls = naive_class_criteria(scores)
        assert vec.values[0] == pytest.approx(cls["mean_max"], rel=1e-12)
        assert vec.values[2] == pytest.approx(cls["mean_2nd"], rel=1e-12)
        assert np.isfinite(vec.values).all()

    def test_translation_invariance(self, rng):
        for _ in range(10):
            cluster, boxes, scores, masks = random_cluster(rng, canvas=16)
            base = feature_vector(cluster).values
            # Shift everything 7 px right and 5 px down on a larger canvas.
            dx, dy = 7, 5
            shifted_masks = []
            for m in masks:
                big = np.zeros((m.shape[0] + dy, m.shape[1] + dx), dtype=bool)
                big[dy:, dx:] = m
                shifted_masks.append(big)
            shifted_boxes = [(b[0] + dx, b[1] + dy, b[2] + dx, b[3] + dy)
                             for b in boxes]
            shifted = feature_vector(
                make_cluster(shifted_boxes, scores=scores, masks=shifted_masks)
            ).values
            assert shifted == pytest.approx(base, abs=1e-9)

    def test_scale_invariance(self, rng):
        for scale in (2, 3):
            for _ in range(5):
                cluster, boxes, scores, masks = random_cluster(rng, canvas=14)
                base = feature_vector(cluster).values
                scaled_masks = [
                    np.kron(m, np.ones((scale, scale), dtype=bool)) for m in masks
                ]
                scaled_boxes = [tuple(v * scale for v in b) for b in boxes]
                scaled = feature_vector(
                    make_cluster(scaled_boxes, scores=scores, masks=scaled_masks)
                ).values
                assert scaled == pytest.approx(base, abs=1e-9)

    def test_kde_config_validation(self):
        with pytest.raises(ValueError):
            KdeConfig(grid_size=1)
        with pytest.raises(ValueError):
            KdeConfig(bandwidth=0.0)
