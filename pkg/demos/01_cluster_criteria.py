"""Walkthrough: from repeated sampled detections of one object to the
26-value uncertainty criteria vector.

Builds a cluster of five jittered detections (box + mask + class scores),
then prints each criteria family the way the pipeline computes them.
"""

import numpy as np

from cornercase import FEATURE_NAMES, BBox, rle_encode
from cornercase.criteria import compute_criteria
from cornercase.clustering import Cluster
from cornercase.dataio import DetectionSample

rng = np.random.default_rng(0)
CANVAS = 48


def jittered_detection(rep):
    """One stochastic forward pass over the same physical object."""
    x1, y1, x2, y2 = np.array([10, 12, 30, 34]) + rng.normal(0, 0.6, 4)
    mask = np.zeros((CANVAS, CANVAS), dtype=bool)
    mask[round(y1):round(y2), round(x1):round(x2)] = True
    scores = np.array([0.05, 0.8, 0.15]) + rng.normal(0, 0.02, 3).clip(-0.04, 0.04)
    scores = np.abs(scores) / np.abs(scores).sum()
    return DetectionSample(
        image_id="demo",
        repetition=rep,
        class_scores=scores,
        bbox=BBox(x1, y1, x2, y2),
        mask=rle_encode(mask),
    )


cluster = Cluster(cluster_id=0, members=[jittered_detection(r) for r in range(5)])
crit = compute_criteria(cluster)

print("=== class-score spread ===")
print(f"top class        : {crit.class_scores.k_max} "
      f"(mean {crit.class_scores.mean_max:.3f} ± {crit.class_scores.std_max:.3f})")
print(f"runner-up class  : {crit.class_scores.k_2nd} "
      f"(mean {crit.class_scores.mean_2nd:.3f} ± {crit.class_scores.std_2nd:.3f})")

print("\n=== box spread (stds normalized by mean box size) ===")
print(f"mean box         : {tuple(round(v, 2) for v in crit.box.mean_box.as_tuple())}")
print(f"sigma x1..h      : {np.round(crit.box.sigma, 4)}")
print(f"IoU vs mean box  : {crit.box.iou_mean:.4f} ± {crit.box.iou_std:.4f}")

print("\n=== mask spread ===")
print(f"majority-mask box: {tuple(round(v, 2) for v in crit.mask.mean_mask_box.as_tuple())}")
print(f"sigma cx,cy,w,h  : {np.round(crit.mask.sigma_box, 4)}")
print(f"IoU vs mean mask : {crit.mask.iou_mean:.4f} ± {crit.mask.iou_std:.4f}")
print(f"area spread      : {crit.mask.area_std_norm:.4f} (normalized)")

print("\n=== box-head vs mask-head agreement ===")
print(f"iou_mis          : {crit.combined.iou_mis:.4f}")
print(f"KL(box|mask)     : {crit.combined.kl_b_m:.4f}")
print(f"KL(mask|box)     : {crit.combined.kl_m_b:.4f}")
print(f"JS distance      : {crit.combined.js:.4f}")
print(f"EMD              : {crit.combined.emd:.4f}")

print("\n=== assembled feature vector ===")
for name, value in zip(FEATURE_NAMES, crit.vector.values):
    print(f"{name:<16} {value: .6f}")
