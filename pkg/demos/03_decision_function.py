"""Walkthrough: training the corner-case decision function.

Labeled criteria vectors (from the categorization stage) are balanced by
random undersampling, a Gini decision tree / random forest is trained,
and the model is judged by class-weighted F1. A quick correlation and
forward feature-selection pass shows which criteria carry signal.
"""

import numpy as np

from cornercase.analysis import correlation_report, sequential_feature_selection
from cornercase.decision import (
    CLASS_NAMES,
    TrainConfig,
    evaluate,
    random_undersample,
    train_forest,
    train_tree,
)

rng = np.random.default_rng(42)

# Synthetic stand-in for a labeled feature table: 26 criteria per row,
# classes unbalanced the way real categorization output is (mostly TP).
sizes = [800, 150, 120, 90, 300]  # TP, L_CC, C_CC, LC_CC, FP
X, y = [], []
for label, size in enumerate(sizes):
    center = np.zeros(26)
    center[label] = 3.0            # a few informative criteria per class
    center[(label + 9) % 26] = -2.0
    X.append(rng.normal(center, 1.0, size=(size, 26)))
    y.append(np.full(size, label))
X, y = np.vstack(X), np.concatenate(y)

print(f"rows per class before balancing: {list(np.bincount(y))}")
Xb, yb, _ = random_undersample(X, y, seed=0, expected_classes=range(5))
print(f"rows per class after balancing : {list(np.bincount(yb))}\n")

tree = train_tree(Xb, yb, TrainConfig(seed=0))
print("--- decision tree ---")
print(evaluate(tree, X, y).format_table())

forest = train_forest(Xb, yb, TrainConfig(n_trees=25, seed=0))
print("\n--- random forest (25 trees) ---")
print(evaluate(forest, X, y).format_table())

# Which criteria track ground-truth IoU? (synthetic IoU built from two
# columns so the report has something to find)
box_iou = 1 / (1 + np.exp(-(X[:, 12] - X[:, 21])))
table = correlation_report(X, box_iou, box_iou)
best = max(table.entries.items(), key=lambda kv: abs(kv[1]["box_iou"].pearson or 0))
print(f"\nstrongest IoU correlate: {best[0]} "
      f"(pearson {best[1]['box_iou'].pearson:.3f})")

result = sequential_feature_selection(
    Xb, yb, direction="forward", n_select=5, folds=3, seed=0,
    tree_config=TrainConfig(max_depth=5),
)
print("forward-selected criteria:", ", ".join(result.selected))
print("cv score per step:", [round(s, 3) for s in result.step_scores])
