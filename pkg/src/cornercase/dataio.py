"""Detection-dump and ground-truth file formats, plus the feature table.

Detections and ground truth are NDJSON (one JSON object per line);
the run manifest is a single JSON document.  Computed per-cluster feature
rows are persisted as CSV with a fixed canonical header.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from cornercase.geometry import BBox, RleMask

log = logging.getLogger(__name__)


class SchemaError(ValueError):
    """An input file violates the expected schema; carries the line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


@dataclass(frozen=True)
class ImageInfo:
    image_id: str
    width: int
    height: int


@dataclass(frozen=True)
class RunManifest:
    dataset: str
    k: int
    class_names: tuple
    repetitions: int
    images: tuple  # of ImageInfo

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"need at least 2 classes, got k={self.k}")
        if len(self.class_names) != self.k:
            raise ValueError("class_names length does not match k")
        ids = [im.image_id for im in self.images]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate image_id in manifest")

    def image_map(self) -> dict:
        return {im.image_id: im for im in self.images}


@dataclass(frozen=True)
class DetectionSample:
    """One forward-pass prediction: class-score vector, box, optional mask."""

    image_id: str
    repetition: int
    class_scores: np.ndarray
    bbox: BBox
    mask: RleMask | None = None


@dataclass(frozen=True)
class GroundTruthObject:
    image_id: str
    class_id: int
    bbox: BBox
    mask: RleMask | None = None


@dataclass
class FeatureRow:
    image_id: str
    cluster_id: int
    values: np.ndarray  # the 26 criteria in canonical order
    label: str | None = None


def load_manifest(path) -> RunManifest:
    with open(path) as f:
        obj = json.load(f)
    try:
        return RunManifest(
            dataset=obj["dataset"],
            k=int(obj["k"]),
            class_names=tuple(obj["class_names"]),
            repetitions=int(obj["repetitions"]),
            images=tuple(
                ImageInfo(im["image_id"], int(im["width"]), int(im["height"]))
                for im in obj["images"]
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(path, 1, f"bad manifest: {exc}") from exc


def _parse_bbox(raw, image: ImageInfo, path, line_no) -> BBox:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise SchemaError(path, line_no, f"bbox must be [x1,y1,x2,y2], got {raw!r}")
    x1, y1, x2, y2 = (float(v) for v in raw)
    if not all(math.isfinite(v) for v in (x1, y1, x2, y2)) or x1 > x2 or y1 > y2:
        raise SchemaError(path, line_no, f"invalid bbox {raw!r}")
    # Sampled boxes routinely spill off-frame; clamp rather than reject.
    cx1 = min(max(x1, 0.0), image.width)
    cy1 = min(max(y1, 0.0), image.height)
    cx2 = min(max(x2, 0.0), image.width)
    cy2 = min(max(y2, 0.0), image.height)
    if (cx1, cy1, cx2, cy2) != (x1, y1, x2, y2):
        log.warning("%s:%d: bbox clamped to image bounds", path, line_no)
    return BBox(cx1, cy1, cx2, cy2)


def _parse_mask(raw, image: ImageInfo, path, line_no) -> RleMask | None:
    if raw is None:
        return None
    try:
        rle = RleMask.from_json(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(path, line_no, f"bad RLE mask: {exc}") from exc
    if rle.size != (image.height, image.width):
        raise SchemaError(
            path, line_no,
            f"mask size {rle.size} does not match image {image.height}x{image.width}",
        )
    return rle


def _iter_ndjson(path):
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(path, line_no, f"invalid JSON: {exc}") from exc


def load_run(manifest_path, detections_path):
    """Load a detection dump grouped per image.

    Returns (manifest, groups) where groups maps image_id to the list of
    DetectionSamples ordered by (repetition, input order); image_ids are in
    lexicographic order.
    """
    manifest = load_manifest(manifest_path)
    images = manifest.image_map()
    per_image: dict = {}
    for line_no, obj in _iter_ndjson(detections_path):
        try:
            image_id = obj["image_id"]
            repetition = int(obj["repetition"])
            scores = np.asarray(obj["class_scores"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(detections_path, line_no, f"bad detection: {exc}") from exc
        if image_id not in images:
            raise SchemaError(detections_path, line_no, f"unknown image_id {image_id!r}")
        if repetition < 0:
            raise SchemaError(detections_path, line_no, "repetition must be >= 0")
        if scores.ndim != 1 or scores.size != manifest.k:
            raise SchemaError(
                detections_path, line_no,
                f"class_scores length {scores.size} != k={manifest.k}",
            )
        if not np.all(np.isfinite(scores)) or np.any(scores < 0) or np.any(scores > 1):
            raise SchemaError(detections_path, line_no, "class_scores outside [0, 1]")
        sample = DetectionSample(
            image_id=image_id,
            repetition=repetition,
            class_scores=scores,
            bbox=_parse_bbox(obj["bbox"], images[image_id], detections_path, line_no),
            mask=_parse_mask(obj.get("mask"), images[image_id], detections_path, line_no),
        )
        per_image.setdefault(image_id, []).append(sample)
    groups = {}
    for image_id in sorted(per_image):
        samples = per_image[image_id]
        order = sorted(range(len(samples)), key=lambda i: (samples[i].repetition, i))
        groups[image_id] = [samples[i] for i in order]
    total = sum(len(v) for v in groups.values())
    log.info("loaded %d detections over %d images", total, len(groups))
    return manifest, groups


def load_ground_truth(path, manifest: RunManifest):
    """Load GT objects grouped per image_id (lexicographic order)."""
    images = manifest.image_map()
    per_image: dict = {}
    for line_no, obj in _iter_ndjson(path):
        try:
            image_id = obj["image_id"]
            class_id = int(obj["class_id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(path, line_no, f"bad GT object: {exc}") from exc
        if image_id not in images:
            raise SchemaError(path, line_no, f"unknown image_id {image_id!r}")
        if not 0 <= class_id < manifest.k:
            raise SchemaError(path, line_no, f"class_id {class_id} outside [0, {manifest.k})")
        gt = GroundTruthObject(
            image_id=image_id,
            class_id=class_id,
            bbox=_parse_bbox(obj["bbox"], images[image_id], path, line_no),
            mask=_parse_mask(obj.get("mask"), images[image_id], path, line_no),
        )
        per_image.setdefault(image_id, []).append(gt)
    return {image_id: per_image[image_id] for image_id in sorted(per_image)}


# Deferred import target; criteria.py defines the canonical ordering.
def _feature_names():
    from cornercase.criteria import FEATURE_NAMES

    return FEATURE_NAMES


def write_feature_table(rows, path) -> None:
    names = _feature_names()
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["image_id", "cluster_id", *names, "label"])
        for row in rows:
            values = np.asarray(row.values, dtype=float)
            if values.shape != (len(names),):
                raise ValueError(
                    f"feature row has {values.size} values, expected {len(names)}"
                )
            if not np.all(np.isfinite(values)):
                raise ValueError(
                    f"non-finite feature value in row ({row.image_id}, {row.cluster_id})"
                )
            writer.writerow(
                [row.image_id, row.cluster_id]
                + [repr(float(v)) for v in values]
                + [row.label if row.label is not None else ""]
            )


def read_feature_table(path):
    names = _feature_names()
    rows = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        expected = ["image_id", "cluster_id", *names, "label"]
        if header != expected:
            raise ValueError(f"unexpected feature table header in {path}")
        for record in reader:
            image_id, cluster_id = record[0], int(record[1])
            values = np.array([float(v) for v in record[2:2 + len(names)]])
            label = record[2 + len(names)] or None
            rows.append(FeatureRow(image_id, cluster_id, values, label))
    return rows
