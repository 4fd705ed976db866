"""Write MC-Dropout detection dumps and converted ground truth.

Output layout under ``config.out_dir``:

* ``manifest.json``  — dataset name, class list, repetition count, image sizes
* ``detections.ndjson`` — one line per raw detection per repetition
* ``gt.ndjson``      — converted COCO-style annotations (when provided)
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
import torch
from PIL import Image, ImageDraw

from ccexport.config import ExportConfig
from ccexport.model import build_model, detect_once
from ccexport.rle import rle_decode, rle_encode

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".ppm")


def _list_images(images_dir) -> list[Path]:
    root = Path(images_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"images directory not found: {root}")
    paths = sorted(
        p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not paths:
        raise FileNotFoundError(f"no images found under {root}")
    return paths


def _load_image(path: Path) -> torch.Tensor:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return torch.from_numpy(arr).permute(2, 0, 1)


def export_detections(config: ExportConfig) -> tuple[Path, Path]:
    """Run ``config.repetitions`` stochastic passes over every image and
    write ``manifest.json`` plus ``detections.ndjson``.

    Returns (manifest_path, detections_path).  Deterministic for a fixed
    seed: the torch RNG is seeded once and consumed in a fixed
    (image, repetition) order.
    """
    paths = _list_images(config.images_dir)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    # Seed before construction so random-init weights are reproducible too.
    torch.manual_seed(config.seed)
    model = build_model(config)

    images_meta = []
    n_det = 0
    detections_path = out / "detections.ndjson"
    with open(detections_path, "w") as f:
        for path in paths:
            image_id = path.stem
            tensor = _load_image(path)
            height, width = int(tensor.shape[1]), int(tensor.shape[2])
            images_meta.append(
                {"image_id": image_id, "width": width, "height": height}
            )
            for repetition in range(config.repetitions):
                for det in detect_once(model, tensor, config):
                    record = {
                        "image_id": image_id,
                        "repetition": repetition,
                        "class_scores": det["class_scores"],
                        "bbox": det["bbox"],
                        "mask": rle_encode(det["mask"]),
                    }
                    f.write(json.dumps(record) + "\n")
                    n_det += 1
            log.info("%s: %d repetitions done", image_id, config.repetitions)

    manifest = {
        "dataset": config.dataset,
        "k": config.k,
        "class_names": list(config.class_names),
        "repetitions": config.repetitions,
        "images": images_meta,
        # class_scores are the softmax over foreground classes with the
        # background column removed and the remainder renormalized
        "background_stripped": True,
    }
    manifest_path = out / "manifest.json"
    with open(manifest_path, "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
    log.info("wrote %d detections for %d images", n_det, len(paths))
    return manifest_path, detections_path


def _polygon_mask(polygons, height: int, width: int) -> np.ndarray:
    im = Image.new("1", (width, height), 0)
    draw = ImageDraw.Draw(im)
    for poly in polygons:
        points = [(poly[i], poly[i + 1]) for i in range(0, len(poly) - 1, 2)]
        if len(points) >= 3:
            draw.polygon(points, outline=1, fill=1)
    return np.asarray(im, dtype=bool)


def _segmentation_mask(seg, height: int, width: int) -> np.ndarray | None:
    if seg is None:
        return None
    if isinstance(seg, dict):
        counts = seg.get("counts")
        if not isinstance(counts, list):
            raise ValueError("compressed RLE counts are not supported")
        return rle_decode({"size": seg["size"], "counts": counts})
    if isinstance(seg, list):
        return _polygon_mask(seg, height, width)
    raise ValueError(f"unsupported segmentation type {type(seg).__name__}")


def export_ground_truth(config: ExportConfig) -> Path:
    """Convert a COCO-style annotation file to ``gt.ndjson``.

    Category ids are remapped to contiguous [0, k) in ascending original-id
    order; annotations for unknown image ids or categories are skipped with
    a warning.  Boxes convert from [x, y, w, h] to [x1, y1, x2, y2]; polygon
    and uncompressed-RLE segmentations become full-image run-length masks.
    """
    if config.annotations is None:
        raise ValueError("config.annotations is required for GT export")
    with open(config.annotations) as f:
        coco = json.load(f)

    categories = sorted(coco.get("categories", []), key=lambda c: c["id"])
    if categories:
        class_map = {c["id"]: i for i, c in enumerate(categories)}
    else:
        # No category table: assume ids already match config.class_names.
        class_map = {i: i for i in range(config.k)}
    image_info = {
        im["id"]: (Path(im["file_name"]).stem, im["height"], im["width"])
        for im in coco.get("images", [])
    }

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gt_path = out / "gt.ndjson"
    n_written = 0
    with open(gt_path, "w") as f:
        for ann in coco.get("annotations", []):
            if ann["image_id"] not in image_info:
                log.warning("annotation %s: unknown image id %s, skipped",
                            ann.get("id"), ann["image_id"])
                continue
            if ann["category_id"] not in class_map:
                log.warning("annotation %s: unknown category id %s, skipped",
                            ann.get("id"), ann["category_id"])
                continue
            image_id, height, width = image_info[ann["image_id"]]
            x, y, w, h = (float(v) for v in ann["bbox"])
            mask = _segmentation_mask(ann.get("segmentation"), height, width)
            record = {
                "image_id": image_id,
                "class_id": class_map[ann["category_id"]],
                "bbox": [x, y, x + w, y + h],
                "mask": rle_encode(mask) if mask is not None else None,
            }
            f.write(json.dumps(record) + "\n")
            n_written += 1
    log.info("wrote %d ground-truth objects", n_written)
    return gt_path
