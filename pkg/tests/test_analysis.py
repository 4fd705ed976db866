import numpy as np
import pytest

from cornercase.analysis import (
    correlation_report,
    pearson,
    sequential_feature_selection,
    spearman,
)
from cornercase.criteria import FEATURE_NAMES
from cornercase.decision import TrainConfig


class TestPearson:
    def test_hand_example(self):
        assert pearson([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-12)

    def test_perfect_correlation(self):
        x = [1.0, 2.0, 5.0, 9.0]
        assert pearson(x, [2 * v + 3 for v in x]) == pytest.approx(1.0)
        assert pearson(x, [-v for v in x]) == pytest.approx(-1.0)

    def test_zero_variance_raises(self):
        with pytest.raises(ZeroDivisionError):
            pearson([1, 1, 1], [1, 2, 3])

    def test_too_short(self):
        with pytest.raises(ValueError):
            pearson([1], [2])

    def test_matches_numpy(self, rng):
        for _ in range(30):
            x = rng.normal(size=20)
            y = rng.normal(size=20)
            assert pearson(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-12)


class TestSpearman:
    def test_hand_example(self):
        assert spearman([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-12)

    def test_monotone_transform_invariance(self, rng):
        x = rng.normal(size=30)
        y = rng.normal(size=30)
        base = spearman(x, y)
        assert spearman(np.exp(x), y) == pytest.approx(base, abs=1e-12)
        assert spearman(x, y ** 3) == pytest.approx(base, abs=1e-12)

    def test_ties_use_average_ranks(self):
        # x = [1, 1, 2] -> ranks [1.5, 1.5, 3]
        got = spearman([1, 1, 2], [10, 20, 30])
        expected = pearson([1.5, 1.5, 3], [1, 2, 3])
        assert got == pytest.approx(expected, abs=1e-12)


class TestCorrelationReport:
    def test_shape_and_values(self, rng):
        n = 40
        features = rng.normal(size=(n, 26))
        box_iou = features[:, 12] * 0.5 + rng.normal(0, 0.01, size=n)
        mask_iou = rng.random(n)
        table = correlation_report(features, box_iou, mask_iou)
        assert set(table.entries) == set(FEATURE_NAMES)
        strong = table.entries["box_iou_mean"]["box_iou"]
        assert strong.pearson > 0.99
        assert not strong.undefined

    def test_zero_variance_flagged_undefined(self, rng):
        features = rng.normal(size=(20, 26))
        features[:, 3] = 7.0  # constant column
        table = correlation_report(features, rng.random(20), rng.random(20))
        entry = table.entries[FEATURE_NAMES[3]]["box_iou"]
        assert entry.undefined
        assert entry.pearson is None and entry.spearman is None

    def test_serialization(self, rng):
        features = rng.normal(size=(10, 26))
        table = correlation_report(features, rng.random(10), rng.random(10))
        obj = table.to_json()
        assert set(obj) == set(FEATURE_NAMES)
        rows = list(table.to_csv_rows())
        assert rows[0] == ["feature", "target", "pearson", "spearman", "undefined"]
        assert len(rows) == 1 + 26 * 2


def informative_dataset(rng, n=300, n_features=26, informative=(0, 1, 2)):
    """Labels depend only on the `informative` columns."""
    X = rng.normal(size=(n, n_features))
    logits = X[:, informative[0]] + 2 * X[:, informative[1]] - X[:, informative[2]]
    y = (logits > 0).astype(int)
    return X, y


class TestSfs:
    def test_forward_finds_informative(self, rng):
        X, y = informative_dataset(rng, n=200, n_features=12)
        result = sequential_feature_selection(
            X, y, direction="forward", n_select=4, folds=3,
            tree_config=TrainConfig(max_depth=4),
        )
        assert result.direction == "forward"
        assert len(result.selected) == 4
        assert len(result.step_scores) == 4
        picked_idx = {FEATURE_NAMES.index(name) for name in result.selected}
        assert len(picked_idx & {0, 1, 2}) >= 2

    def test_backward_keeps_n_select(self, rng):
        X, y = informative_dataset(rng, n=120, n_features=8)
        result = sequential_feature_selection(
            X, y, direction="backward", n_select=5, folds=3,
            tree_config=TrainConfig(max_depth=3),
        )
        assert len(result.selected) == 5
        assert len(result.step_scores) == 3  # one per removal

    def test_seeded_determinism(self, rng):
        X, y = informative_dataset(rng, n=100, n_features=8)
        kwargs = dict(direction="forward", n_select=3, seed=4, folds=3,
                      tree_config=TrainConfig(max_depth=3))
        a = sequential_feature_selection(X, y, **kwargs)
        b = sequential_feature_selection(X, y, **kwargs)
        assert a.to_json() == b.to_json()

    def test_n_select_too_large(self, rng):
        X, y = informative_dataset(rng, n=50, n_features=4)
        with pytest.raises(ValueError):
            sequential_feature_selection(X, y, n_select=5)

    def test_bad_direction(self, rng):
        X, y = informative_dataset(rng, n=50, n_features=4)
        with pytest.raises(ValueError):
            sequential_feature_selection(X, y, direction="sideways", n_select=2)
