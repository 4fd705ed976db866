"""Mask R-CNN with test-time dropout and full class-score extraction.

The stock torchvision forward only returns top-1 labels after NMS; the
downstream uncertainty criteria need the full softmax over foreground
classes and, by default, the raw (un-suppressed) detections of every
stochastic repetition.  This module runs the heads manually to get both.
"""

from __future__ import annotations

import logging

import numpy as np
import torch
from torch import nn
from torch.nn.functional import softmax
from torchvision.models.detection import maskrcnn_resnet50_fpn
from torchvision.models.detection.roi_heads import paste_masks_in_image
from torchvision.models.detection.transform import resize_boxes
from torchvision.ops import batched_nms, clip_boxes_to_image

from ccexport.config import ExportConfig

log = logging.getLogger(__name__)


class _DropoutWrap(nn.Module):
    """Applies dropout to a submodule's output."""

    def __init__(self, inner: nn.Module, p: float):
        super().__init__()
        self.inner = inner
        self.dropout = nn.Dropout(p)

    def forward(self, x):
        return self.dropout(self.inner(x))


def build_model(config: ExportConfig) -> nn.Module:
    """Mask R-CNN with dropout inserted per config, in inference mode with
    the dropout layers still sampling."""
    model = maskrcnn_resnet50_fpn(
        weights=None,
        weights_backbone=None,
        num_classes=config.k + 1,  # foreground classes + background
        min_size=config.min_size,
        max_size=config.max_size,
    )
    if config.dropout_placement in ("box_head", "both"):
        model.roi_heads.box_head = _DropoutWrap(
            model.roi_heads.box_head, config.dropout
        )
    if config.dropout_placement in ("mask_head", "both"):
        model.roi_heads.mask_head = _DropoutWrap(
            model.roi_heads.mask_head, config.dropout
        )
    if config.weights:
        state = torch.load(config.weights, map_location="cpu")
        model.load_state_dict(state)
    else:
        log.warning("no weights file given; using randomly initialized model")
    model.to(config.device)
    model.eval()
    # MC-Dropout: everything frozen except the dropout sampling.
    for module in model.modules():
        if isinstance(module, nn.Dropout):
            module.train()
    return model


@torch.no_grad()
def detect_once(model: nn.Module, image: torch.Tensor, config: ExportConfig):
    """One stochastic forward pass over one image.

    Returns a list of dicts with keys class_scores (k floats over the
    foreground classes), bbox (x1, y1, x2, y2 in original pixels) and
    mask (boolean (H, W) array), sorted by descending confidence.
    """
    original_size = (int(image.shape[-2]), int(image.shape[-1]))
    images, _ = model.transform([image.to(config.device)], None)
    features = model.backbone(images.tensors)
    proposals, _ = model.rpn(images, features)
    if proposals[0].numel() == 0:
        return []
    box_features = model.roi_heads.box_roi_pool(
        features, proposals, images.image_sizes
    )
    class_logits, box_regression = model.roi_heads.box_predictor(
        model.roi_heads.box_head(box_features)
    )
    probs = softmax(class_logits, dim=1)
    boxes_per_class = model.roi_heads.box_coder.decode(box_regression, proposals)

    # Full softmax over foreground classes, background stripped.
    fg = probs[:, 1:]
    fg = fg / fg.sum(dim=1, keepdim=True)
    confidence, k_max = fg.max(dim=1), fg.argmax(dim=1)
    confidence = confidence.values
    idx = torch.arange(fg.shape[0], device=fg.device)
    boxes = boxes_per_class[idx, k_max + 1]
    boxes = clip_boxes_to_image(boxes, images.image_sizes[0])

    keep = (
        (confidence >= config.score_floor)
        & (boxes[:, 2] - boxes[:, 0] > 1.0)
        & (boxes[:, 3] - boxes[:, 1] > 1.0)
    )
    boxes, fg, confidence, k_max = boxes[keep], fg[keep], confidence[keep], k_max[keep]
    if config.nms and boxes.shape[0]:
        kept = batched_nms(boxes, confidence, k_max, config.nms_iou)
        boxes, fg, confidence, k_max = boxes[kept], fg[kept], confidence[kept], k_max[kept]
    order = torch.argsort(confidence, descending=True, stable=True)
    order = order[: config.max_detections]
    boxes, fg, k_max = boxes[order], fg[order], k_max[order]
    if boxes.shape[0] == 0:
        return []

    mask_features = model.roi_heads.mask_roi_pool(
        features, [boxes], images.image_sizes
    )
    mask_logits = model.roi_heads.mask_predictor(
        model.roi_heads.mask_head(mask_features)
    )
    idx = torch.arange(boxes.shape[0], device=boxes.device)
    mask_probs = mask_logits[idx, k_max + 1].sigmoid()

    boxes_orig = resize_boxes(boxes, images.image_sizes[0], original_size)
    pasted = paste_masks_in_image(
        mask_probs.unsqueeze(1), boxes_orig, original_size
    )
    masks = (pasted.squeeze(1) > 0.5).cpu().numpy()

    detections = []
    for i in range(boxes_orig.shape[0]):
        detections.append(
            {
                "class_scores": [float(v) for v in fg[i].cpu()],
                "bbox": [float(v) for v in boxes_orig[i].cpu()],
                "mask": masks[i].astype(bool),
            }
        )
    return detections
