"""MC-Dropout detection exporter.

Runs repeated stochastic forward passes of a torchvision Mask R-CNN
(dropout forced active at inference) over a directory of images and
writes the NDJSON/manifest files consumed by the corner-case analysis
toolkit; also converts COCO-style ground-truth annotations.
"""

from ccexport.config import ExportConfig
from ccexport.export import export_detections, export_ground_truth
from ccexport.rle import rle_decode, rle_encode

__all__ = [
    "ExportConfig",
    "export_detections",
    "export_ground_truth",
    "rle_decode",
    "rle_encode",
]
