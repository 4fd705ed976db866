"""Walkthrough: matching cluster representatives to ground truth and
assigning corner-case categories.

A detection lands in one of five buckets based on its matched IoU band
and whether the predicted class is right:

    IoU > 0.5,   class right  -> TP
    0.1 < IoU <= 0.5, right   -> L_CC   (localization corner case)
    IoU > 0.5,   class wrong  -> C_CC   (classification corner case)
    0.1 < IoU <= 0.5, wrong   -> LC_CC  (both)
    IoU <= 0.1 or unmatched   -> FP
"""

from cornercase.dataio import GroundTruthObject
from cornercase.geometry import BBox
from cornercase.matching import (
    ObjectPrediction,
    categorize_all,
    match_image,
    summarize,
)

gts = [
    GroundTruthObject("demo", 0, BBox(10, 10, 30, 30)),   # a car
    GroundTruthObject("demo", 1, BBox(50, 10, 70, 30)),   # a person
    GroundTruthObject("demo", 0, BBox(10, 50, 30, 70)),   # another car
]

preds = [
    # dead-on, right class -> TP
    ObjectPrediction("demo", 0, BBox(10, 10, 30, 30), k_max=0, score=0.95),
    # half the person box, right class -> L_CC
    ObjectPrediction("demo", 1, BBox(50, 10, 70, 20), k_max=1, score=0.7),
    # dead-on the second car but called a person -> C_CC
    ObjectPrediction("demo", 2, BBox(10, 50, 30, 70), k_max=1, score=0.6),
    # nowhere near anything -> FP
    ObjectPrediction("demo", 3, BBox(80, 80, 95, 95), k_max=2, score=0.5),
]

matches = categorize_all(match_image(preds, gts))
for m in matches:
    target = "-" if m.gt_index is None else f"gt[{m.gt_index}]"
    print(f"cluster {m.cluster_id} -> {target:<6} IoU={m.iou_box_gt:.2f} "
          f"class_ok={str(m.class_correct):<5} => {m.category.value}")

summary = summarize(matches, total_gt=len(gts))
print("\ncategory counts:", summary.counts)
print("missed objects (FN):", summary.fn_count)
print("percentages:", {k: round(v, 1) for k, v in summary.percentages.items()})
