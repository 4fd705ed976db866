"""Cluster-to-ground-truth matching, corner-case categories, and mAP.

Matching is class-agnostic (Hungarian over 1 - IoU costs) with the class
checked afterwards; wrong-class matches are what the classification
corner-case categories are made of.  Boundary convention: IoU exactly at
the TP threshold falls into the lower band, IoU exactly at the FP
threshold is FP.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from cornercase.geometry import BBox, iou_box, iou_mask

TP_IOU_DEFAULT = 0.5
FP_IOU_DEFAULT = 0.1


class CornerCaseCategory(enum.Enum):
    TP = "TP"
    L_CC = "L_CC"
    C_CC = "C_CC"
    LC_CC = "LC_CC"
    FP = "FP"


CATEGORY_ORDER = tuple(CornerCaseCategory)

CORNER_CASE_CATEGORIES = (
    CornerCaseCategory.L_CC,
    CornerCaseCategory.C_CC,
    CornerCaseCategory.LC_CC,
)


@dataclass(frozen=True)
class ObjectPrediction:
    """Cluster representative used for matching and mAP."""

    image_id: str
    cluster_id: int
    mean_box: BBox
    k_max: int
    score: float  # mean of the top class score
    mean_mask: np.ndarray | None = None


@dataclass
class MatchResult:
    image_id: str
    cluster_id: int
    gt_index: int | None  # index into the image's GT list; None when unmatched
    iou_box_gt: float
    iou_mask_gt: float | None
    class_correct: bool
    category: CornerCaseCategory | None = None


@dataclass
class DatasetSummary:
    counts: dict  # category name -> count
    percentages: dict
    fn_count: int
    total_detections: int
    total_gt: int
    map_box: float | None = None
    map_mask: float | None = None


def hungarian(cost: np.ndarray):
    """Minimum-cost one-to-one partial assignment over min(n, m) pairs.

    Returns (row, col) pairs sorted lexicographically.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.size == 0:
        return []
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    rows, cols = linear_sum_assignment(cost)
    return sorted(zip(rows.tolist(), cols.tolist()))


def match_image(predictions, gt_objects, iou_source: str = "box",
                fp_iou: float = FP_IOU_DEFAULT, gt_masks=None):
    """Hungarian-match cluster representatives to the GT of one image.

    ``gt_masks`` optionally carries decoded GT masks aligned with
    ``gt_objects``; when absent, mask IoUs are computed only if both the
    prediction and the GT carry decoded masks already.
    """
    if iou_source not in ("box", "mask"):
        raise ValueError(f"iou_source must be 'box' or 'mask', got {iou_source!r}")
    if gt_masks is None:
        gt_masks = [None] * len(gt_objects)

    def box_iou_pg(pred, gi):
        return iou_box(pred.mean_box, gt_objects[gi].bbox)

    def mask_iou_pg(pred, gi):
        if pred.mean_mask is None or gt_masks[gi] is None:
            return None
        return iou_mask(pred.mean_mask, gt_masks[gi])

    n, m = len(predictions), len(gt_objects)
    results = []
    assigned = {}
    if n and m:
        cost = np.empty((n, m))
        for i, pred in enumerate(predictions):
            for j in range(m):
                if iou_source == "box":
                    iou = box_iou_pg(pred, j)
                else:
                    iou = mask_iou_pg(pred, j)
                    if iou is None:
                        raise ValueError("mask IoU source requested without masks")
                cost[i, j] = 1.0 - iou
        assigned = dict(hungarian(cost))
    for i, pred in enumerate(predictions):
        gi = assigned.get(i)
        if gi is not None:
            primary = (1.0 - cost[i, gi])
            if primary < fp_iou:  # too weak a match: sever it
                gi = None
        if gi is None:
            results.append(
                MatchResult(
                    image_id=pred.image_id,
                    cluster_id=pred.cluster_id,
                    gt_index=None,
                    iou_box_gt=0.0,
                    iou_mask_gt=None,
                    class_correct=False,
                )
            )
        else:
            results.append(
                MatchResult(
                    image_id=pred.image_id,
                    cluster_id=pred.cluster_id,
                    gt_index=gi,
                    iou_box_gt=box_iou_pg(pred, gi),
                    iou_mask_gt=mask_iou_pg(pred, gi),
                    class_correct=pred.k_max == gt_objects[gi].class_id,
                )
            )
    return results


def categorize(match: MatchResult, iou_source: str = "box",
               tp_iou: float = TP_IOU_DEFAULT,
               fp_iou: float = FP_IOU_DEFAULT) -> CornerCaseCategory:
    """Assign the corner-case category from match IoU and class correctness."""
    if match.gt_index is None:
        return CornerCaseCategory.FP
    iou = match.iou_box_gt if iou_source == "box" else match.iou_mask_gt
    if iou is None:
        raise ValueError("mask IoU requested but not recorded on the match")
    if iou <= fp_iou:
        return CornerCaseCategory.FP
    if match.class_correct:
        return CornerCaseCategory.TP if iou > tp_iou else CornerCaseCategory.L_CC
    return CornerCaseCategory.C_CC if iou > tp_iou else CornerCaseCategory.LC_CC


def categorize_all(matches, iou_source="box", tp_iou=TP_IOU_DEFAULT,
                   fp_iou=FP_IOU_DEFAULT):
    for m in matches:
        m.category = categorize(m, iou_source, tp_iou, fp_iou)
    return matches


def summarize(matches, total_gt: int, map_box=None, map_mask=None) -> DatasetSummary:
    """Per-category counts and percentages, FN count, and optional mAP values.

    A GT object counts toward FN when no surviving (non-FP) match points at it.
    """
    counts = {c.value: 0 for c in CATEGORY_ORDER}
    matched_gt = set()
    for m in matches:
        if m.category is None:
            raise ValueError("matches must be categorized before summarizing")
        counts[m.category.value] += 1
        if m.gt_index is not None and m.category is not CornerCaseCategory.FP:
            matched_gt.add((m.image_id, m.gt_index))
    total = len(matches)
    percentages = {
        name: (100.0 * n / total if total else 0.0) for name, n in counts.items()
    }
    return DatasetSummary(
        counts=counts,
        percentages=percentages,
        fn_count=total_gt - len(matched_gt),
        total_detections=total,
        total_gt=total_gt,
        map_box=map_box,
        map_mask=map_mask,
    )


def _average_precision(records, n_gt: int) -> float:
    """All-point interpolated AP. records: (score, is_tp) tuples."""
    if n_gt == 0:
        return 0.0
    records = sorted(records, key=lambda r: -r[0])
    tp = np.cumsum([1 if hit else 0 for _, hit in records])
    fp = np.cumsum([0 if hit else 1 for _, hit in records])
    recall = tp / n_gt
    precision = tp / np.maximum(tp + fp, 1)
    # right-to-left precision envelope, integrated over recall steps
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    ap = 0.0
    prev_recall = 0.0
    for i in range(len(records)):
        if recall[i] > prev_recall:
            ap += (recall[i] - prev_recall) * envelope[i]
            prev_recall = recall[i]
    return float(ap)


def map_at_iou(predictions_by_image: dict, gt_by_image: dict,
               threshold: float = 0.5, source: str = "box",
               gt_masks_by_image: dict | None = None) -> float | None:
    """Mean AP over GT classes with greedy score-ordered matching at IoU > threshold.

    Returns None when there is no ground truth at all.
    """
    classes = sorted(
        {g.class_id for gts in gt_by_image.values() for g in gts}
    )
    if not classes:
        return None
    aps = []
    for cls in classes:
        records = []
        n_gt = 0
        for image_id, gts in gt_by_image.items():
            cls_gt = [i for i, g in enumerate(gts) if g.class_id == cls]
            n_gt += len(cls_gt)
            preds = [
                p for p in predictions_by_image.get(image_id, []) if p.k_max == cls
            ]
            preds = sorted(preds, key=lambda p: -p.score)
            used = set()
            masks = (gt_masks_by_image or {}).get(image_id, [None] * len(gts))
            for p in preds:
                best_iou, best_gi = 0.0, None
                for gi in cls_gt:
                    if gi in used:
                        continue
                    if source == "box":
                        iou = iou_box(p.mean_box, gts[gi].bbox)
                    else:
                        if p.mean_mask is None or masks[gi] is None:
                            iou = 0.0
                        else:
                            iou = iou_mask(p.mean_mask, masks[gi])
                    if iou > best_iou:
                        best_iou, best_gi = iou, gi
                if best_gi is not None and best_iou > threshold:
                    used.add(best_gi)
                    records.append((p.score, True))
                else:
                    records.append((p.score, False))
        aps.append(_average_precision(records, n_gt))
    return float(np.mean(aps))
