import numpy as np
import pytest

from cornercase.clustering import (
    Cluster,
    ClusteringConfig,
    cluster_gmm,
    cluster_greedy_iou,
    cluster_samples,
    filter_clusters,
    fit_gmm,
)
from helpers import make_sample


def samples_from_boxes(boxes, image_id="img0"):
    return [
        make_sample(b, [0.8, 0.2], image_id=image_id, repetition=i)
        for i, b in enumerate(boxes)
    ]


class TestConfig:
    def test_defaults(self):
        cfg = ClusteringConfig()
        assert cfg.method == "greedy-iou"
        assert cfg.link_iou == 0.5
        assert cfg.min_cluster_size == 2

    def test_validation(self):
        with pytest.raises(ValueError):
            ClusteringConfig(link_iou=0.0)
        with pytest.raises(ValueError):
            ClusteringConfig(link_iou=1.0)
        with pytest.raises(ValueError):
            ClusteringConfig(min_cluster_size=0)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            cluster_samples(samples_from_boxes([(0, 0, 1, 1)]),
                            ClusteringConfig(method="agglomerative"))


class TestGreedyIou:
    def test_two_separated_objects(self):
        boxes = [
            (0, 0, 10, 10), (1, 0, 11, 10), (0, 1, 10, 11),   # object A
            (50, 50, 60, 60), (51, 50, 61, 60),               # object B
        ]
        clusters = cluster_greedy_iou(samples_from_boxes(boxes), ClusteringConfig())
        assert [c.size for c in clusters] == [3, 2]
        assert clusters[0].cluster_id == 0
        assert {tuple(b) for b in clusters[1].boxes().tolist()} == {
            (50, 50, 60, 60), (51, 50, 61, 60)
        }

    def test_single_linkage_chains(self):
        # a-b and b-c overlap >= 0.5 but a-c do not: all three still merge.
        boxes = [(0, 0, 10, 10), (3, 0, 13, 10), (6, 0, 16, 10)]
        clusters = cluster_greedy_iou(samples_from_boxes(boxes), ClusteringConfig())
        assert len(clusters) == 1 and clusters[0].size == 3

    def test_threshold_is_inclusive(self):
        # IoU exactly 0.5: boxes (0,0,10,10) and (0,0,10,5) -> 50/100
        boxes = [(0, 0, 10, 10), (0, 0, 10, 5)]
        clusters = cluster_greedy_iou(samples_from_boxes(boxes), ClusteringConfig())
        assert len(clusters) == 1

    def test_tie_order_same_size(self):
        # Two clusters of equal size: ordered by smallest member index.
        boxes = [(50, 50, 60, 60), (0, 0, 10, 10), (51, 50, 61, 60), (1, 0, 11, 10)]
        clusters = cluster_greedy_iou(samples_from_boxes(boxes), ClusteringConfig())
        assert clusters[0].boxes()[0].tolist() == [50, 50, 60, 60]

    def test_empty_and_multi_image_guard(self):
        assert cluster_greedy_iou([], ClusteringConfig()) == []
        mixed = [make_sample((0, 0, 1, 1), [0.8, 0.2], image_id="a"),
                 make_sample((0, 0, 1, 1), [0.8, 0.2], image_id="b")]
        with pytest.raises(ValueError):
            cluster_greedy_iou(mixed, ClusteringConfig())

    def test_deterministic(self):
        boxes = [(i, i, i + 10, i + 10) for i in range(0, 40, 3)]
        a = cluster_greedy_iou(samples_from_boxes(boxes), ClusteringConfig())
        b = cluster_greedy_iou(samples_from_boxes(boxes), ClusteringConfig())
        assert [[m.repetition for m in c.members] for c in a] == \
               [[m.repetition for m in c.members] for c in b]


class TestGmm:
    def two_blob_boxes(self, rng=None):
        # Two well-separated tight groups of 5 identical boxes each.
        return [(10, 10, 30, 30)] * 5 + [(70, 70, 95, 95)] * 5

    def test_recovers_two_tight_groups(self):
        boxes = self.two_blob_boxes()
        clusters = cluster_gmm(samples_from_boxes(boxes),
                               ClusteringConfig(method="gmm"))
        assert len(clusters) == 2
        assert sorted(c.size for c in clusters) == [5, 5]
        for c in clusters:
            assert len({tuple(b) for b in c.boxes().tolist()}) == 1

    def test_matches_greedy_on_tight_groups(self):
        boxes = self.two_blob_boxes()
        samples = samples_from_boxes(boxes)
        gmm = cluster_gmm(samples, ClusteringConfig(method="gmm"))
        greedy = cluster_greedy_iou(samples, ClusteringConfig())
        key = lambda cs: sorted(
            tuple(sorted(m.repetition for m in c.members)) for c in cs
        )
        assert key(gmm) == key(greedy)

    def test_bic_picks_one_component_for_single_group(self):
        x = np.tile([10.0, 10.0, 30.0, 30.0], (12, 1))
        fit = fit_gmm(x, max_components=5, seed=0)
        assert fit.n_components == 1

    def test_seeded_determinism(self):
        boxes = self.two_blob_boxes()
        cfg = ClusteringConfig(method="gmm", gmm_seed=3)
        a = cluster_gmm(samples_from_boxes(boxes), cfg)
        b = cluster_gmm(samples_from_boxes(boxes), cfg)
        assert [[m.repetition for m in c.members] for c in a] == \
               [[m.repetition for m in c.members] for c in b]

    def test_duplicate_boxes_survive_variance_floor(self):
        boxes = [(5, 5, 20, 20)] * 6
        clusters = cluster_gmm(samples_from_boxes(boxes),
                               ClusteringConfig(method="gmm"))
        assert len(clusters) == 1 and clusters[0].size == 6

    def test_singleton_input(self):
        clusters = cluster_gmm(samples_from_boxes([(0, 0, 5, 5)]),
                               ClusteringConfig(method="gmm"))
        assert len(clusters) == 1 and clusters[0].size == 1

    def test_log_likelihood_nondecreasing(self, rng):
        x = np.array(self.two_blob_boxes()) + rng.normal(0, 1.5, size=(10, 4))
        fit = fit_gmm(x, max_components=3, seed=0)
        trace = np.array(fit.log_likelihood_trace)
        assert np.all(np.diff(trace) >= -1e-8)


class TestFilter:
    def test_partition(self):
        clusters = [
            Cluster(0, samples_from_boxes([(0, 0, 1, 1)] * 3)),
            Cluster(1, samples_from_boxes([(0, 0, 1, 1)])),
        ]
        kept, dropped = filter_clusters(clusters, 2)
        assert [c.cluster_id for c in kept] == [0]
        assert [c.cluster_id for c in dropped] == [1]

    def test_min_size_one_keeps_all(self):
        clusters = [Cluster(0, samples_from_boxes([(0, 0, 1, 1)]))]
        kept, dropped = filter_clusters(clusters, 1)
        assert len(kept) == 1 and not dropped
