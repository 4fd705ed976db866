"""Shared construction helpers for the test suite."""

import numpy as np

from cornercase.clustering import Cluster
from cornercase.dataio import DetectionSample
from cornercase.geometry import BBox, rle_encode


def make_sample(box, scores, mask=None, image_id="img0", repetition=0):
    return DetectionSample(
        image_id=image_id,
        repetition=repetition,
        class_scores=np.asarray(scores, dtype=float),
        bbox=BBox(*box),
        mask=None if mask is None else rle_encode(np.asarray(mask, dtype=bool)),
    )


def make_cluster(boxes, scores=None, masks=None, image_id="img0", cluster_id=0):
    n = len(boxes)
    if scores is None:
        scores = [[0.8, 0.2]] * n
    if masks is None:
        masks = [None] * n
    members = [
        make_sample(b, s, m, image_id=image_id, repetition=i)
        for i, (b, s, m) in enumerate(zip(boxes, scores, masks))
    ]
    return Cluster(cluster_id=cluster_id, members=members)


def rect_mask(h, w, y0, y1, x0, x1):
    """Boolean (h, w) mask with the half-open rectangle [y0:y1, x0:x1] set."""
    m = np.zeros((h, w), dtype=bool)
    m[y0:y1, x0:x1] = True
    return m
