"""Uncertainty-based corner case detection for instance segmentation output.

The package turns repeated stochastic forward-pass predictions (e.g. from an
MC-Dropout instance segmentation model) into per-object uncertainty criteria,
categorizes objects against ground truth, trains a ground-truth-free decision
function over the criteria, and selects corner-case images for iterative
training.
"""

from cornercase.geometry import (
    BBox,
    BBoxCwh,
    RleMask,
    iou_box,
    iou_mask,
    mask_area,
    mask_bbox,
    rle_decode,
    rle_encode,
)
from cornercase.criteria import FEATURE_NAMES, KdeConfig, feature_vector
from cornercase.clustering import Cluster, ClusteringConfig, cluster_samples
from cornercase.matching import CornerCaseCategory

__all__ = [
    "BBox",
    "BBoxCwh",
    "RleMask",
    "iou_box",
    "iou_mask",
    "mask_area",
    "mask_bbox",
    "rle_decode",
    "rle_encode",
    "FEATURE_NAMES",
    "KdeConfig",
    "feature_vector",
    "Cluster",
    "ClusteringConfig",
    "cluster_samples",
    "CornerCaseCategory",
]

__version__ = "0.1.0"
