from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segfuse import (
    Image,
    LabelMap,
    ValidationError,
    dataset_stats,
    disagreement_fraction,
    instance_ap,
    masked_weighted_l1,
    miou,
    split_instances,
)
from segfuse.instances import InstanceMap
from segfuse.metrics import (
    DEFAULT_AP_THRESHOLDS,
    DEFAULT_MASKED_CONFIG,
    DEFAULT_PROJECTION,
    TRANSLATION_TAXONOMY,
    merge_iou_reports,
)

from .conftest import corrupted_copy, random_label_map
from .oracles import (
    disagreement_oracle,
    instance_ap_oracle,
    masked_l1_oracle,
    miou_oracle,
)

CAR = 13


def lm(rows):
    return LabelMap(np.array(rows, np.uint8))


class TestMiou:
    def test_identity_is_one(self, rng):
        m = random_label_map(rng, 16, 16)
        rep = miou(m, m)
        assert rep.mean_iou == 1.0
        assert all(v.iou == 1.0 for v in rep.per_class.values())

    def test_hand_counts(self):
        rep = miou(lm([[0, 0], [0, 0]]), lm([[0, 0], [1, 1]]))
        assert rep.per_class[0].iou == 0.5
        assert rep.per_class[1].iou == 0.0
        assert rep.mean_iou == 0.25

    def test_ignored_pixels_excluded(self):
        rep = miou(lm([[0, 0], [1, 0]]), lm([[0, 255], [1, 1]]))
        assert rep.per_class[0].iou == 0.5
        assert rep.per_class[1].iou == 0.5
        assert rep.mean_iou == 0.5

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            miou(lm([[0]]), lm([[0, 0]]))

    def test_relabel_equivariance(self, rng):
        pred = random_label_map(rng, 12, 12, num_classes=5)
        gt = random_label_map(rng, 12, 12, num_classes=5)
        perm = {0: 4, 1: 3, 2: 2, 3: 1, 4: 0}
        relabel = np.vectorize(perm.get)
        a = miou(pred, gt)
        b = miou(
            LabelMap(relabel(pred.data).astype(np.uint8)),
            LabelMap(relabel(gt.data).astype(np.uint8)),
        )
        assert a.mean_iou == pytest.approx(b.mean_iou, rel=1e-12)

    def test_matches_oracle(self, rng):
        for _ in range(10):
            pred = random_label_map(rng, int(rng.integers(1, 33)), int(rng.integers(1, 33)))
            gt = LabelMap(
                np.where(
                    rng.random(pred.shape) < 0.1, 255, corrupted_copy(rng, pred.data, 0.3).data
                ).astype(np.uint8)
            )
            rep = miou(pred, gt)
            inter, union, mean = miou_oracle(pred.data, gt.data)
            assert {c: v.intersection for c, v in rep.per_class.items()} == {
                c: inter.get(c, 0) for c in rep.per_class
            }
            assert {c: v.union for c, v in rep.per_class.items()} == union
            assert rep.mean_iou == pytest.approx(mean, rel=1e-9)

    def test_merge_reports_aggregates_counts(self):
        a = miou(lm([[0, 0]]), lm([[0, 1]]))
        b = miou(lm([[1, 1]]), lm([[1, 1]]))
        merged = merge_iou_reports([a, b])
        assert merged.per_class[1].intersection == 2
        assert merged.per_class[1].union == 3


class TestDisagreement:
    def test_identical_maps(self, rng):
        m = random_label_map(rng, 8, 8)
        assert disagreement_fraction(m, m) == 0.0

    def test_one_pixel_differs(self):
        assert disagreement_fraction(lm([[0, 0], [0, 0]]), lm([[0, 0], [0, 1]])) == 0.25

    def test_excluded_class_shrinks_denominator(self):
        a = lm([[5, 0], [0, 0]])
        b = lm([[0, 0], [0, 0]])
        assert disagreement_fraction(a, b, exclude={5}) == 0.0

    def test_symmetry(self, rng):
        a = random_label_map(rng, 16, 16)
        b = random_label_map(rng, 16, 16)
        assert disagreement_fraction(a, b) == disagreement_fraction(b, a)

    def test_triangle_inequality(self, rng):
        a = random_label_map(rng, 16, 16)
        b = random_label_map(rng, 16, 16)
        c = random_label_map(rng, 16, 16)
        assert disagreement_fraction(a, c) <= (
            disagreement_fraction(a, b) + disagreement_fraction(b, c) + 1e-12
        )

    def test_matches_oracle(self, rng):
        for _ in range(10):
            a = random_label_map(rng, 16, 16, num_classes=6)
            b = corrupted_copy(rng, a.data, 0.4, num_classes=6)
            exclude = frozenset({0, 3})
            assert disagreement_fraction(a, b, exclude) == pytest.approx(
                disagreement_oracle(a.data, b.data, exclude), rel=1e-12
            )


def boxes_map(*rects, cls=CAR, shape=(16, 16)):
    a = np.zeros(shape, np.uint8)
    for r0, c0, r1, c1 in rects:
        a[r0:r1, c0:c1] = cls
    return split_instances(LabelMap(a))


class TestInstanceAp:
    def test_identity_is_one(self):
        gt = boxes_map((0, 0, 3, 3), (5, 5, 9, 9), (12, 1, 14, 6))
        rep = instance_ap(gt, gt, {CAR})
        assert rep.ap == 1.0
        assert all(v == 1.0 for v in rep.per_threshold.values())

    def test_missed_instance_halves_score(self):
        gt = boxes_map((0, 0, 3, 3), (8, 8, 12, 12))
        pred = boxes_map((0, 0, 3, 3))
        rep = instance_ap(pred, gt, {CAR}, thresholds=(0.5,))
        assert rep.per_threshold[0.5] == 0.5

    def test_low_iou_scores_zero(self):
        gt = boxes_map((0, 0, 2, 5))  # 10 px
        pred = boxes_map((0, 0, 2, 2))  # 4 px, IoU 0.4
        rep = instance_ap(pred, gt, {CAR}, thresholds=(0.5,))
        assert rep.per_threshold[0.5] == 0.0

    def test_default_thresholds(self):
        assert DEFAULT_AP_THRESHOLDS == (
            0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95,
        )

    def test_no_gt_instances_scores_zero(self):
        empty = split_instances(LabelMap(np.zeros((4, 4), np.uint8)))
        pred = boxes_map((0, 0, 2, 2), shape=(4, 4))
        assert instance_ap(pred, empty, {CAR}).ap == 0.0

    def test_matches_oracle(self, rng):
        for _ in range(10):
            h, w = int(rng.integers(8, 33)), int(rng.integers(8, 33))
            gt_labels = random_label_map(rng, h, w, num_classes=19)
            pred_labels = corrupted_copy(rng, gt_labels.data, 0.15)
            gt = split_instances(gt_labels)
            pred = split_instances(pred_labels)
            classes = {11, 12, 13}
            rep = instance_ap(pred, gt, classes)
            per_t, ap = instance_ap_oracle(
                pred.ids, dict(pred.table), gt.ids, dict(gt.table), classes, DEFAULT_AP_THRESHOLDS
            )
            assert rep.ap == pytest.approx(ap, rel=1e-9, abs=1e-12)
            for t in DEFAULT_AP_THRESHOLDS:
                assert rep.per_threshold[t] == pytest.approx(per_t[t], rel=1e-9, abs=1e-12)


def rgb(rows):
    return Image(np.array(rows, np.uint8))


class TestMaskedL1:
    def test_identical_images_zero(self, rng):
        x = Image(rng.integers(0, 256, (8, 8, 3)).astype(np.uint8))
        labels = random_label_map(rng, 8, 8)
        assert masked_weighted_l1(x, x, labels) == 0.0

    def test_single_road_pixel(self):
        x = rgb([[[100, 100, 100]]])
        y = rgb([[[110, 90, 100]]])
        assert masked_weighted_l1(x, y, lm([[0]])) == 40.0

    def test_two_sky_pixels(self):
        x = rgb([[[100, 100, 100], [100, 100, 100]]])
        y = rgb([[[110, 110, 110], [90, 90, 90]]])
        # sky importance 0.2, p=2, per-pixel channel sum 30 each
        assert masked_weighted_l1(x, y, lm([[10, 10]])) == pytest.approx(6.0, rel=1e-12)

    def test_sentinel_pixels_contribute_nothing(self):
        x = rgb([[[0, 0, 0]]])
        y = rgb([[[255, 255, 255]]])
        assert masked_weighted_l1(x, y, lm([[255]])) == 0.0

    def test_pseudometric_properties(self, rng):
        labels = random_label_map(rng, 8, 8)
        imgs = [Image(rng.integers(0, 256, (8, 8, 3)).astype(np.uint8)) for _ in range(3)]
        x, y, z = imgs
        dxy = masked_weighted_l1(x, y, labels)
        dyx = masked_weighted_l1(y, x, labels)
        assert dxy >= 0
        assert dxy == dyx
        assert masked_weighted_l1(x, z, labels) <= (
            dxy + masked_weighted_l1(y, z, labels) + 1e-9
        )

    def test_matches_oracle(self, rng):
        importance = [c.importance for c in TRANSLATION_TAXONOMY]
        for _ in range(5):
            h, w = int(rng.integers(1, 33)), int(rng.integers(1, 33))
            x = Image(rng.integers(0, 256, (h, w, 3)).astype(np.uint8))
            y = Image(rng.integers(0, 256, (h, w, 3)).astype(np.uint8))
            labels = random_label_map(rng, h, w, sentinel_prob=0.05)
            got = masked_weighted_l1(x, y, labels)
            want = masked_l1_oracle(x.data, y.data, labels.data, importance, DEFAULT_PROJECTION)
            assert got == pytest.approx(want, rel=1e-9)

    @settings(deadline=None, max_examples=20)
    @given(st.integers(0, 2**32 - 1))
    def test_nonnegative(self, seed):
        local = np.random.default_rng(seed)
        x = Image(local.integers(0, 256, (4, 4, 3)).astype(np.uint8))
        y = Image(local.integers(0, 256, (4, 4, 3)).astype(np.uint8))
        labels = random_label_map(local, 4, 4)
        assert masked_weighted_l1(x, y, labels) >= 0.0

    def test_projection_must_land_in_taxonomy(self):
        from segfuse import MaskedDistanceConfig

        with pytest.raises(ValidationError):
            MaskedDistanceConfig(TRANSLATION_TAXONOMY, {0: 99})


class TestDatasetStats:
    def test_two_traffic_sign_blobs(self):
        a = np.zeros((6, 6), np.uint8)
        a[0, 0] = 7
        a[5, 5] = 7
        rep = dataset_stats([(LabelMap(a), None)])
        assert rep.per_class_segments[7] == 2
        assert rep.per_class_pixels[7] == 2

    def test_empty_entry_list(self):
        rep = dataset_stats([])
        assert rep.num_entries == 0
        assert rep.per_class_pixels == {}
        assert rep.instance_counts == {}

    def test_instance_counts_aggregate(self, rng):
        labels = random_label_map(rng, 16, 16)
        inst = split_instances(labels)
        rep = dataset_stats([(labels, inst), (labels, inst)])
        for cls, n in inst.class_instance_counts().items():
            assert rep.instance_counts[cls] == 2 * n

    def test_segment_counts_match_instancer(self, rng):
        labels = random_label_map(rng, 24, 24, num_classes=5)
        rep = dataset_stats([(labels, None)])
        for cls in rep.per_class_segments:
            m = split_instances(labels, {cls})
            assert rep.per_class_segments[cls] == m.instance_count()
