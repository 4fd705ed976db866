"""Criteria evaluation: correlations against GT IoU and sequential feature
selection with a decision-tree wrapper."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from cornercase.criteria import FEATURE_NAMES
from cornercase.decision import TrainConfig, evaluate, train_tree


@dataclass
class Correlation:
    pearson: float | None
    spearman: float | None
    undefined: bool = False


@dataclass
class CorrelationTable:
    # feature name -> {"box_iou": Correlation, "mask_iou": Correlation}
    entries: dict

    def to_json(self) -> dict:
        out = {}
        for name, targets in self.entries.items():
            out[name] = {
                t: {"pearson": c.pearson, "spearman": c.spearman, "undefined": c.undefined}
                for t, c in targets.items()
            }
        return out

    def to_csv_rows(self):
        yield ["feature", "target", "pearson", "spearman", "undefined"]
        for name, targets in self.entries.items():
            for t, c in targets.items():
                yield [
                    name, t,
                    "" if c.pearson is None else repr(c.pearson),
                    "" if c.spearman is None else repr(c.spearman),
                    str(c.undefined),
                ]


@dataclass
class SelectionResult:
    direction: str
    selected: list  # ordered feature names
    step_scores: list  # cross-validated score after each step

    def to_json(self) -> dict:
        return {
            "direction": self.direction,
            "selected": self.selected,
            "step_scores": self.step_scores,
        }


def pearson(x, y) -> float:
    """Standard sample Pearson correlation; raises on zero variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 2:
        raise ValueError("need two equal-length vectors of size >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0.0 or sy == 0.0:
        raise ZeroDivisionError("zero variance input")
    return float(dx @ dy) / (sx * sy)


def spearman(x, y) -> float:
    """Pearson correlation of average ranks (ties get the mean rank)."""
    return pearson(rankdata(x), rankdata(y))


def _safe_correlation(x, y) -> Correlation:
    try:
        return Correlation(pearson=pearson(x, y), spearman=spearman(x, y))
    except ZeroDivisionError:
        return Correlation(pearson=None, spearman=None, undefined=True)


def correlation_report(features: np.ndarray, box_iou, mask_iou) -> CorrelationTable:
    """Pearson/Spearman of every criterion against box IoU and mask IoU.

    ``features`` is (n_rows, 26) in canonical column order; zero-variance
    columns are flagged as undefined rather than reported as 0.
    """
    features = np.asarray(features, dtype=float)
    box_iou = np.asarray(box_iou, dtype=float)
    mask_iou = np.asarray(mask_iou, dtype=float)
    entries = {}
    for i, name in enumerate(FEATURE_NAMES):
        entries[name] = {
            "box_iou": _safe_correlation(features[:, i], box_iou),
            "mask_iou": _safe_correlation(features[:, i], mask_iou),
        }
    return CorrelationTable(entries=entries)


def _fold_indices(n: int, folds: int, seed: int):
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    return np.array_split(order, folds)


def _cv_score(X, y, feature_idx, folds, seed, tree_config) -> float:
    """Mean weighted F1 of a decision tree over seeded k-fold splits."""
    parts = _fold_indices(X.shape[0], folds, seed)
    scores = []
    for f in range(len(parts)):
        test_idx = parts[f]
        train_idx = np.concatenate([parts[g] for g in range(len(parts)) if g != f])
        if np.unique(y[train_idx]).size < 2 or test_idx.size == 0:
            continue
        model = train_tree(X[train_idx][:, feature_idx], y[train_idx], tree_config)
        scores.append(evaluate(model, X[test_idx][:, feature_idx], y[test_idx]).weighted_f1)
    if not scores:
        raise ValueError("no valid cross-validation fold")
    return float(np.mean(scores))


def sequential_feature_selection(X, y, direction: str = "forward",
                                 n_select: int = 10, folds: int = 5,
                                 seed: int = 0,
                                 tree_config: TrainConfig | None = None) -> SelectionResult:
    """Greedy wrapper selection maximizing cross-validated weighted F1.

    Forward adds the best feature per step; backward removes the feature
    whose removal scores best until n_select remain.  Score ties go to the
    lower feature index.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n_features = X.shape[1]
    if n_select > n_features:
        raise ValueError(f"n_select {n_select} exceeds {n_features} features")
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be forward or backward, got {direction!r}")
    tree_config = tree_config or TrainConfig()
    step_scores = []
    if direction == "forward":
        selected: list = []
        while len(selected) < n_select:
            candidates = [i for i in range(n_features) if i not in selected]
            best = None  # (-score, candidate)
            for c in candidates:
                score = _cv_score(X, y, selected + [c], folds, seed, tree_config)
                key = (-score, c)
                if best is None or key < best:
                    best = key
            selected.append(best[1])
            step_scores.append(-best[0])
        order = selected
    else:
        current = list(range(n_features))
        removal_order: list = []
        while len(current) > n_select:
            best = None  # (-score, candidate_to_remove)
            for c in current:
                remaining = [i for i in current if i != c]
                score = _cv_score(X, y, remaining, folds, seed, tree_config)
                key = (-score, c)
                if best is None or key < best:
                    best = key
            current.remove(best[1])
            removal_order.append(best[1])
            step_scores.append(-best[0])
        order = current
    return SelectionResult(
        direction=direction,
        selected=[FEATURE_NAMES[i] if i < len(FEATURE_NAMES) else f"f{i}" for i in order],
        step_scores=step_scores,
    )
