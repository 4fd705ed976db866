"""Export run configuration."""

from __future__ import annotations

from dataclasses import dataclass, field

# Driving-domain default class list used when no annotation file supplies
# the categories.
DEFAULT_CLASS_NAMES = (
    "car",
    "truck",
    "bus",
    "trailer",
    "construction_vehicle",
    "pedestrian",
    "motorcycle",
    "bicycle",
    "traffic_cone",
    "barrier",
)


@dataclass
class ExportConfig:
    images_dir: str
    out_dir: str
    weights: str | None = None        # state-dict path; None = random init
    annotations: str | None = None    # COCO-style JSON, supplies classes/GT
    class_names: tuple = DEFAULT_CLASS_NAMES
    repetitions: int = 10
    dropout: float = 0.2
    dropout_placement: str = "box_head"  # or "mask_head", "both"
    score_floor: float = 0.05
    nms: bool = False                 # raw detections by default
    nms_iou: float = 0.5
    max_detections: int = 100
    min_size: int = 800
    max_size: int = 1333
    device: str = "cpu"
    seed: int = 0
    dataset: str = "export"

    def __post_init__(self):
        if not 0 < self.dropout < 1:
            raise ValueError(f"dropout must be in (0, 1), got {self.dropout}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.dropout_placement not in ("box_head", "mask_head", "both"):
            raise ValueError(
                f"unknown dropout placement {self.dropout_placement!r}"
            )
        if len(self.class_names) < 2:
            raise ValueError("need at least 2 foreground classes")

    @property
    def k(self) -> int:
        return len(self.class_names)
