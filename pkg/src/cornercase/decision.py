"""Corner-case decision function: class balancing, tree/forest training,
prediction, and class-weighted F1 evaluation.

Trees are CART-style greedy Gini splits with deterministic tie-breaks
(lowest feature index, then lowest threshold).  Forests bootstrap the rows
and consider round(sqrt(n_features)) features per split; per-tree seeds are
derived from the master seed so parallel and serial training agree.
Evaluation is always over the five corner-case categories.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from cornercase.matching import CATEGORY_ORDER

CLASS_NAMES = tuple(c.value for c in CATEGORY_ORDER)  # TP, L_CC, C_CC, LC_CC, FP


@dataclass
class TrainConfig:
    max_depth: int = 12
    min_leaf: int = 5
    n_trees: int = 100
    features_per_split: int | None = None  # None: all (tree) / sqrt (forest)
    seed: int = 0


@dataclass
class TreeNode:
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    distribution: np.ndarray | None = None  # leaf class distribution

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def to_json(self) -> dict:
        if self.is_leaf:
            return {"leaf": [float(p) for p in self.distribution]}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_json(),
            "right": self.right.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TreeNode":
        if "leaf" in obj:
            return cls(distribution=np.array(obj["leaf"]))
        return cls(
            feature=int(obj["feature"]),
            threshold=float(obj["threshold"]),
            left=cls.from_json(obj["left"]),
            right=cls.from_json(obj["right"]),
        )


@dataclass
class DecisionModel:
    kind: str  # "tree" | "forest"
    trees: list
    config: TrainConfig
    n_classes: int

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "n_classes": self.n_classes,
            "config": {
                "max_depth": self.config.max_depth,
                "min_leaf": self.config.min_leaf,
                "n_trees": self.config.n_trees,
                "features_per_split": self.config.features_per_split,
                "seed": self.config.seed,
            },
            "trees": [t.to_json() for t in self.trees],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DecisionModel":
        return cls(
            kind=obj["kind"],
            trees=[TreeNode.from_json(t) for t in obj["trees"]],
            config=TrainConfig(**obj["config"]),
            n_classes=int(obj["n_classes"]),
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path) -> "DecisionModel":
        with open(path) as f:
            return cls.from_json(json.load(f))


@dataclass
class EvalReport:
    confusion: np.ndarray  # rows: true class, cols: predicted
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    weighted_f1: float

    def to_json(self) -> dict:
        return {
            "classes": list(CLASS_NAMES[: self.confusion.shape[0]]),
            "confusion": self.confusion.tolist(),
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "f1": self.f1.tolist(),
            "support": self.support.tolist(),
            "weighted_f1": self.weighted_f1,
        }

    def format_table(self) -> str:
        names = CLASS_NAMES[: self.confusion.shape[0]]
        lines = ["class      prec   recall  f1      support"]
        for i, name in enumerate(names):
            lines.append(
                f"{name:<10} {self.precision[i]:.3f}  {self.recall[i]:.3f}   "
                f"{self.f1[i]:.3f}   {int(self.support[i])}"
            )
        lines.append(f"weighted F1: {self.weighted_f1:.4f}")
        return "\n".join(lines)


def random_undersample(X: np.ndarray, y: np.ndarray, seed: int = 0,
                       expected_classes=None):
    """Downsample every class without replacement to the minority count.

    ``expected_classes`` lists class indices that must be present; a missing
    class is an error naming it.  Returns (X_sub, y_sub, kept_indices);
    kept rows preserve input order.
    """
    y = np.asarray(y, dtype=int)
    if expected_classes is not None:
        missing = [c for c in expected_classes if not np.any(y == c)]
        if missing:
            names = [CLASS_NAMES[c] if c < len(CLASS_NAMES) else str(c)
                     for c in missing]
            raise ValueError(f"classes without any rows: {', '.join(names)}")
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) == 0:
        raise ValueError("empty labeled set")
    minority = int(counts.min())
    rng = np.random.default_rng(seed)
    kept = []
    for c in classes:
        idx = np.flatnonzero(y == c)
        kept.append(rng.choice(idx, size=minority, replace=False))
    kept = np.sort(np.concatenate(kept))
    return X[kept], y[kept], kept


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


def _best_split(X, y, n_classes, feature_indices, min_leaf):
    """Greedy minimum weighted Gini split. Ties: lowest feature, lowest threshold."""
    n = y.shape[0]
    best = None  # (impurity, feature, threshold)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    for feat in feature_indices:
        values = X[:, feat]
        order = np.argsort(values, kind="stable")
        sv = values[order]
        counts_left = np.cumsum(onehot[order], axis=0)  # counts after i+1 rows
        total = counts_left[-1]
        # candidate split between distinct consecutive values
        distinct = np.flatnonzero(sv[1:] > sv[:-1])  # left sizes = distinct + 1
        for i in distinct:
            n_left = i + 1
            n_right = n - n_left
            if n_left < min_leaf or n_right < min_leaf:
                continue
            left_counts = counts_left[i]
            right_counts = total - left_counts
            impurity = (n_left * _gini(left_counts) + n_right * _gini(right_counts)) / n
            threshold = (sv[i] + sv[i + 1]) / 2.0
            key = (impurity, feat, threshold)
            if best is None or key < best:
                best = key
    return best  # None when no valid split exists


def _grow(X, y, n_classes, config, rng, depth=0):
    counts = np.bincount(y, minlength=n_classes).astype(float)
    node = TreeNode(distribution=counts / counts.sum())
    if depth >= config.max_depth or _gini(counts) == 0.0 or y.size < 2 * config.min_leaf:
        return node
    n_features = X.shape[1]
    if config.features_per_split is None or config.features_per_split >= n_features:
        feats = np.arange(n_features)
    else:
        feats = np.sort(
            rng.choice(n_features, size=config.features_per_split, replace=False)
        )
    split = _best_split(X, y, n_classes, feats, config.min_leaf)
    if split is None:
        return node
    # Weighted child impurity never exceeds the parent's (Gini is concave),
    # so any valid split is accepted; zero-gain splits can still pay off
    # deeper down (e.g. XOR-like labels).
    impurity, feat, threshold = split
    mask = X[:, feat] <= threshold
    node.feature = int(feat)
    node.threshold = float(threshold)
    node.left = _grow(X[mask], y[mask], n_classes, config, rng, depth + 1)
    node.right = _grow(X[~mask], y[~mask], n_classes, config, rng, depth + 1)
    return node


def _check_trainable(y):
    if np.unique(y).size < 2:
        raise ValueError("training needs at least 2 distinct classes")


def train_tree(X, y, config: TrainConfig | None = None,
               n_classes: int = len(CLASS_NAMES)) -> DecisionModel:
    config = config or TrainConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    _check_trainable(y)
    rng = np.random.default_rng(config.seed)
    root = _grow(X, y, n_classes, config, rng)
    return DecisionModel(kind="tree", trees=[root], config=config, n_classes=n_classes)


def train_forest(X, y, config: TrainConfig | None = None,
                 n_classes: int = len(CLASS_NAMES),
                 bootstrap: bool = True) -> DecisionModel:
    config = config or TrainConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    _check_trainable(y)
    per_split = config.features_per_split
    if per_split is None:
        per_split = max(1, round(math.sqrt(X.shape[1])))
    tree_config = TrainConfig(
        max_depth=config.max_depth,
        min_leaf=config.min_leaf,
        n_trees=config.n_trees,
        features_per_split=per_split,
        seed=config.seed,
    )
    trees = []
    n = X.shape[0]
    for t in range(config.n_trees):
        rng = np.random.default_rng((config.seed, t))
        if bootstrap:
            idx = rng.integers(0, n, size=n)
        else:
            idx = np.arange(n)
        trees.append(_grow(X[idx], y[idx], n_classes, tree_config, rng))
    return DecisionModel(kind="forest", trees=trees, config=tree_config,
                         n_classes=n_classes)


def _route(node: TreeNode, x: np.ndarray) -> np.ndarray:
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.distribution


def predict_proba(model: DecisionModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.zeros((X.shape[0], model.n_classes))
    for i, x in enumerate(X):
        if model.kind == "tree":
            out[i] = _route(model.trees[0], x)
        else:
            votes = np.zeros(model.n_classes)
            for tree in model.trees:
                votes[int(np.argmax(_route(tree, x)))] += 1
            out[i] = votes / len(model.trees)
    return out


def predict(model: DecisionModel, X) -> np.ndarray:
    """Deterministic labels; vote/probability ties go to the lower class index."""
    return np.argmax(predict_proba(model, X), axis=1)


def evaluate(model: DecisionModel, X, y) -> EvalReport:
    y = np.asarray(y, dtype=int)
    pred = predict(model, X)
    return score_predictions(y, pred, model.n_classes)


def score_predictions(y_true, y_pred, n_classes: int = len(CLASS_NAMES)) -> EvalReport:
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    confusion = np.zeros((n_classes, n_classes), dtype=int)
    for t, p in zip(y_true, y_pred):
        confusion[t, p] += 1
    support = confusion.sum(axis=1).astype(float)
    pred_count = confusion.sum(axis=0).astype(float)
    diag = np.diag(confusion).astype(float)
    precision = np.divide(diag, pred_count, out=np.zeros(n_classes), where=pred_count > 0)
    recall = np.divide(diag, support, out=np.zeros(n_classes), where=support > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros(n_classes), where=denom > 0)
    total = support.sum()
    weighted_f1 = float(np.sum(support * f1) / total) if total else 0.0
    return EvalReport(
        confusion=confusion,
        precision=precision,
        recall=recall,
        f1=f1,
        support=support,
        weighted_f1=weighted_f1,
    )
