"""Per-cluster uncertainty criteria and the canonical 26-feature vector.

All statistics are sample statistics (N - 1 denominator) over the members
of one cluster.  Box standard deviations are normalized per axis: x-type
components (x1, x2, c_x, w) by the mean box width, y-type components
(y1, y2, c_y, h) by the mean box height.  Mask-box standard deviations are
normalized by the width/height of the mean-mask bounding box.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cornercase.distributions import (
    DiscreteDistribution,
    emd,
    js_distance,
    kde_pdf,
    kl_divergence,
)
from cornercase.geometry import (
    BBox,
    BBoxCwh,
    EmptyMaskError,
    iou_box,
    iou_mask,
    mask_area,
    mask_bbox,
    rle_decode,
)

# Canonical feature order; matches the feature table columns.
FEATURE_NAMES = (
    "class_mean_max",
    "class_std_max",
    "class_mean_2nd",
    "class_std_2nd",
    "box_std_x1",
    "box_std_y1",
    "box_std_x2",
    "box_std_y2",
    "box_std_cx",
    "box_std_cy",
    "box_std_w",
    "box_std_h",
    "box_iou_mean",
    "box_iou_std",
    "mask_std_cx",
    "mask_std_cy",
    "mask_std_w",
    "mask_std_h",
    "mask_iou_mean",
    "mask_iou_std",
    "mask_area_std",
    "iou_mis",
    "kl_b_m",
    "kl_m_b",
    "js",
    "emd",
)


class SingletonClusterError(ValueError):
    """Sample standard deviations need at least two members."""


class DegenerateClusterError(ValueError):
    """The mean box has no extent; normalization is undefined."""


class MaskDegenerateError(ValueError):
    """A member mask or the thresholded mean mask is empty."""


@dataclass
class KdeConfig:
    grid_size: int = 101
    bandwidth: float | None = None  # None selects the Silverman rule

    def __post_init__(self):
        if self.grid_size < 2:
            raise ValueError("grid_size must be >= 2")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")


@dataclass
class ClassScoreCriteria:
    mean_max: float
    std_max: float
    mean_2nd: float
    std_2nd: float
    k_max: int
    k_2nd: int


@dataclass
class BoxCriteria:
    mean_box: BBox
    sigma: np.ndarray  # normalized stds: x1, y1, x2, y2, c_x, c_y, w, h
    iou_mean: float
    iou_std: float
    iou_values: np.ndarray  # IoU(b_j, mean_box) per member


@dataclass
class MaskCriteria:
    mean_mask: np.ndarray
    mean_mask_box: BBoxCwh
    sigma_box: np.ndarray  # normalized stds: c_x, c_y, w, h
    iou_mean: float
    iou_std: float
    iou_values: np.ndarray
    area_mean: float
    area_std_norm: float
    area_std_raw: float


@dataclass
class CombinedCriteria:
    iou_mis: float
    kl_b_m: float
    kl_m_b: float
    js: float
    emd: float


@dataclass
class CriteriaVector:
    image_id: str
    cluster_id: int
    values: np.ndarray  # 26 values in FEATURE_NAMES order


def _require_multi(cluster):
    if cluster.size < 2:
        raise SingletonClusterError(
            f"cluster {cluster.cluster_id} has {cluster.size} member(s); "
            "sample standard deviations need N >= 2"
        )


def class_score_criteria(cluster) -> ClassScoreCriteria:
    """Mean/std of the per-class scores; top and second class by mean."""
    _require_multi(cluster)
    scores = cluster.scores()
    if scores.shape[1] < 2:
        raise ValueError("need at least 2 classes")
    means = scores.mean(axis=0)
    stds = scores.std(axis=0, ddof=1)
    k_max = int(np.argmax(means))  # argmax takes the lowest index on ties
    masked = means.copy()
    masked[k_max] = -np.inf
    k_2nd = int(np.argmax(masked))
    return ClassScoreCriteria(
        mean_max=float(means[k_max]),
        std_max=float(stds[k_max]),
        mean_2nd=float(means[k_2nd]),
        std_2nd=float(stds[k_2nd]),
        k_max=k_max,
        k_2nd=k_2nd,
    )


def _normalize_sigma(raw: np.ndarray, width: float, height: float) -> np.ndarray:
    """raw ordered x1, y1, x2, y2, c_x, c_y, w, h (or the c/w/h tail of it)."""
    x_type = np.array([i % 2 == 0 for i in range(raw.size)])
    out = np.empty_like(raw)
    out[x_type] = raw[x_type] / width
    out[~x_type] = raw[~x_type] / height
    return out


def box_criteria(cluster) -> BoxCriteria:
    """Componentwise box mean, normalized stds, and IoU-vs-mean statistics."""
    _require_multi(cluster)
    corners = cluster.boxes()  # (N, 4): x1, y1, x2, y2
    mean_corners = corners.mean(axis=0)
    mean_box = BBox(*mean_corners)
    if mean_box.width <= 0 or mean_box.height <= 0:
        raise DegenerateClusterError(
            f"mean box of cluster {cluster.cluster_id} has no extent"
        )
    cwh = np.column_stack(
        [
            (corners[:, 0] + corners[:, 2]) / 2.0,
            (corners[:, 1] + corners[:, 3]) / 2.0,
            corners[:, 2] - corners[:, 0],
            corners[:, 3] - corners[:, 1],
        ]
    )
    raw = np.concatenate(
        [corners.std(axis=0, ddof=1), cwh.std(axis=0, ddof=1)]
    )
    sigma = _normalize_sigma(raw, mean_box.width, mean_box.height)
    ious = np.array([iou_box(BBox(*row), mean_box) for row in corners])
    return BoxCriteria(
        mean_box=mean_box,
        sigma=sigma,
        iou_mean=float(ious.mean()),
        iou_std=float(ious.std(ddof=1)),
        iou_values=ious,
    )


def decoded_masks(cluster) -> list:
    """Member masks as boolean arrays; None entries for mask-less members."""
    return [None if s.mask is None else rle_decode(s.mask) for s in cluster.members]


def mask_criteria(cluster, masks=None) -> MaskCriteria:
    """Mean-mask statistics: mask-box stds, mask IoUs, and area spread."""
    _require_multi(cluster)
    if masks is None:
        masks = decoded_masks(cluster)
    if any(m is None for m in masks):
        raise MaskDegenerateError("cluster member without a mask")
    stack = np.stack(masks)
    if not stack.any(axis=(1, 2)).all():
        raise MaskDegenerateError("empty member mask")
    # Strictly > 0.5: a pixel set in exactly half the members is excluded.
    mean_mask = stack.mean(axis=0) > 0.5
    try:
        mean_mask_box = mask_bbox(mean_mask)
    except EmptyMaskError:
        raise MaskDegenerateError("thresholded mean mask is empty") from None
    member_boxes = np.array([mask_bbox(m).as_tuple() for m in masks])
    raw = member_boxes.std(axis=0, ddof=1)  # c_x, c_y, w, h
    sigma_box = _normalize_sigma(raw, mean_mask_box.w, mean_mask_box.h)
    ious = np.array([iou_mask(m, mean_mask) for m in masks])
    areas = np.array([mask_area(m) for m in masks], dtype=float)
    area_mean = float(areas.mean())
    area_std = float(areas.std(ddof=1))
    return MaskCriteria(
        mean_mask=mean_mask,
        mean_mask_box=mean_mask_box,
        sigma_box=sigma_box,
        iou_mean=float(ious.mean()),
        iou_std=float(ious.std(ddof=1)),
        iou_values=ious,
        area_mean=area_mean,
        area_std_norm=area_std / area_mean,
        area_std_raw=area_std,
    )


def combined_criteria(box_crit: BoxCriteria, mask_crit: MaskCriteria,
                      kde_config: KdeConfig | None = None) -> CombinedCriteria:
    """Box-head vs mask-head agreement: iou_mis plus distribution divergences."""
    kde_config = kde_config or KdeConfig()
    mis = iou_box(box_crit.mean_box, mask_crit.mean_mask_box.pixel_extent())
    p_b = kde_pdf(box_crit.iou_values, kde_config.grid_size, kde_config.bandwidth)
    p_m = kde_pdf(mask_crit.iou_values, kde_config.grid_size, kde_config.bandwidth)
    return CombinedCriteria(
        iou_mis=mis,
        kl_b_m=kl_divergence(p_b, p_m),
        kl_m_b=kl_divergence(p_m, p_b),
        js=js_distance(p_b, p_m),
        emd=emd(p_b, p_m),
    )


@dataclass
class ClusterCriteria:
    """All criteria of one cluster, plus the assembled 26-vector."""

    class_scores: ClassScoreCriteria
    box: BoxCriteria
    mask: MaskCriteria
    combined: CombinedCriteria
    vector: CriteriaVector


def compute_criteria(cluster, kde_config: KdeConfig | None = None) -> ClusterCriteria:
    """Compute every criterion of one cluster.

    Raises SingletonClusterError / DegenerateClusterError / MaskDegenerateError
    on clusters whose features are undefined; callers flag and skip those rows.
    """
    cls = class_score_criteria(cluster)
    box = box_criteria(cluster)
    mask = mask_criteria(cluster)
    comb = combined_criteria(box, mask, kde_config)
    values = np.array(
        [
            cls.mean_max,
            cls.std_max,
            cls.mean_2nd,
            cls.std_2nd,
            *box.sigma,
            box.iou_mean,
            box.iou_std,
            *mask.sigma_box,
            mask.iou_mean,
            mask.iou_std,
            mask.area_std_norm,
            comb.iou_mis,
            comb.kl_b_m,
            comb.kl_m_b,
            comb.js,
            comb.emd,
        ]
    )
    image_id = cluster.members[0].image_id
    vector = CriteriaVector(
        image_id=image_id, cluster_id=cluster.cluster_id, values=values
    )
    return ClusterCriteria(
        class_scores=cls, box=box, mask=mask, combined=comb, vector=vector
    )


def feature_vector(cluster, kde_config: KdeConfig | None = None) -> CriteriaVector:
    """The canonical 26-feature vector of one cluster."""
    return compute_criteria(cluster, kde_config).vector
