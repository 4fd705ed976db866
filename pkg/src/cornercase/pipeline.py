"""Glue between the stages: clustering, criteria, categorization, selection.

Per-image work is independent; with jobs > 1 images are processed on a
bounded thread pool and the results merged in image_id order, so the output
never depends on completion order.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from cornercase.clustering import cluster_samples, filter_clusters
from cornercase.config import PipelineConfig
from cornercase.criteria import (
    DegenerateClusterError,
    MaskDegenerateError,
    SingletonClusterError,
    compute_criteria,
)
from cornercase.dataio import FeatureRow
from cornercase.geometry import BBox, rle_decode, rle_encode
from cornercase.matching import (
    CornerCaseCategory,
    ObjectPrediction,
    categorize_all,
    map_at_iou,
    match_image,
    summarize,
)

log = logging.getLogger(__name__)

_DEGENERACIES = (SingletonClusterError, DegenerateClusterError, MaskDegenerateError)


@dataclass
class ImageResult:
    image_id: str
    rows: list          # FeatureRow per usable cluster
    predictions: list   # ObjectPrediction per usable cluster
    skipped: list       # (cluster_id, reason) for flagged clusters
    dropped: int        # clusters below min_cluster_size


def process_image(image_id, samples, config: PipelineConfig) -> ImageResult:
    clusters = cluster_samples(samples, config.clustering)
    kept, dropped = filter_clusters(clusters, config.clustering.min_cluster_size)
    rows, predictions, skipped = [], [], []
    for cluster in kept:
        try:
            crit = compute_criteria(cluster, config.kde)
        except _DEGENERACIES as exc:
            skipped.append((cluster.cluster_id, str(exc)))
            continue
        rows.append(FeatureRow(image_id, cluster.cluster_id, crit.vector.values))
        predictions.append(
            ObjectPrediction(
                image_id=image_id,
                cluster_id=cluster.cluster_id,
                mean_box=crit.box.mean_box,
                k_max=crit.class_scores.k_max,
                score=crit.class_scores.mean_max,
                mean_mask=crit.mask.mean_mask,
            )
        )
    return ImageResult(
        image_id=image_id,
        rows=rows,
        predictions=predictions,
        skipped=skipped,
        dropped=len(dropped),
    )


def run_criteria(groups: dict, config: PipelineConfig):
    """Compute feature rows and cluster representatives for every image."""
    image_ids = sorted(groups)
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            results = list(
                pool.map(lambda i: process_image(i, groups[i], config), image_ids)
            )
    else:
        results = [process_image(i, groups[i], config) for i in image_ids]
    rows = [r for res in results for r in res.rows]
    predictions = [p for res in results for p in res.predictions]
    skipped = [
        {"image_id": res.image_id, "cluster_id": cid, "reason": reason}
        for res in results
        for cid, reason in res.skipped
    ]
    return rows, predictions, skipped


def write_predictions_ndjson(predictions, path) -> None:
    with open(path, "w") as f:
        for p in predictions:
            obj = {
                "image_id": p.image_id,
                "cluster_id": p.cluster_id,
                "mean_box": list(p.mean_box.as_tuple()),
                "k_max": p.k_max,
                "score": p.score,
                "mean_mask": None if p.mean_mask is None else rle_encode(p.mean_mask).to_json(),
            }
            f.write(json.dumps(obj) + "\n")


def read_predictions_ndjson(path):
    from cornercase.geometry import RleMask

    predictions = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            mask = obj.get("mean_mask")
            predictions.append(
                ObjectPrediction(
                    image_id=obj["image_id"],
                    cluster_id=int(obj["cluster_id"]),
                    mean_box=BBox(*obj["mean_box"]),
                    k_max=int(obj["k_max"]),
                    score=float(obj["score"]),
                    mean_mask=None if mask is None else rle_decode(RleMask.from_json(mask)),
                )
            )
    return predictions


def run_categorize(predictions, gt_groups: dict, config: PipelineConfig):
    """Match and categorize all predictions; returns (matches, summary)."""
    preds_by_image: dict = {}
    for p in predictions:
        preds_by_image.setdefault(p.image_id, []).append(p)
    gt_masks_by_image = {
        image_id: [None if g.mask is None else rle_decode(g.mask) for g in gts]
        for image_id, gts in gt_groups.items()
    }
    thr = config.thresholds
    matches = []
    for image_id in sorted(set(preds_by_image) | set(gt_groups)):
        matches.extend(
            match_image(
                preds_by_image.get(image_id, []),
                gt_groups.get(image_id, []),
                iou_source=thr.iou_source,
                fp_iou=thr.fp_iou,
                gt_masks=gt_masks_by_image.get(image_id),
            )
        )
    categorize_all(matches, thr.iou_source, thr.tp_iou, thr.fp_iou)
    total_gt = sum(len(g) for g in gt_groups.values())
    map_box = map_at_iou(preds_by_image, gt_groups, thr.tp_iou, "box",
                         gt_masks_by_image) if total_gt else None
    have_masks = all(
        m is not None for masks in gt_masks_by_image.values() for m in masks
    ) and all(p.mean_mask is not None for p in predictions)
    map_mask = (
        map_at_iou(preds_by_image, gt_groups, thr.tp_iou, "mask", gt_masks_by_image)
        if total_gt and have_masks
        else None
    )
    summary = summarize(matches, total_gt, map_box=map_box, map_mask=map_mask)
    return matches, summary


def write_categorized_ndjson(matches, path) -> None:
    with open(path, "w") as f:
        for m in matches:
            f.write(
                json.dumps(
                    {
                        "image_id": m.image_id,
                        "cluster_id": m.cluster_id,
                        "category": m.category.value,
                        "iou_box_gt": m.iou_box_gt,
                        "iou_mask_gt": m.iou_mask_gt,
                        "class_correct": m.class_correct,
                        "gt_index": m.gt_index,
                    }
                )
                + "\n"
            )


def read_categorized_ndjson(path):
    records = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def summary_to_json(summary) -> dict:
    return {
        "total_detections": summary.total_detections,
        "labeled_objects": summary.total_gt,
        "counts": summary.counts,
        "percentages": summary.percentages,
        "FN": summary.fn_count,
        "map_box": summary.map_box,
        "map_mask": summary.map_mask,
    }


def label_feature_rows(rows, matches) -> list:
    """Attach the categorization label to each feature row in place."""
    by_key = {(m.image_id, m.cluster_id): m.category.value for m in matches}
    for row in rows:
        row.label = by_key.get((row.image_id, row.cluster_id))
    return rows
