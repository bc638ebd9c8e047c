"""
Test the accuracy readings of regression outputs and the per-pair breakdowns
"""

import math

import numpy as np
import pytest

from lib.errors import LengthMismatch
from lib.metrics import (
    round_half_away, accuracy_rounding, accuracy_floor_ceiling, accuracy_within_one,
    mean_squared_error, pair_breakdown, sum_breakdown,
)
from lib.pair_generator import PermutationPair, generate_pair_dataset


class TestRounding:
    """Half away from zero"""

    @pytest.mark.parametrize("value,expected", [
        (0.5, 1.0), (1.5, 2.0), (2.5, 3.0), (-0.5, -1.0), (-2.5, -3.0),
        (4.49, 4.0), (8.6814, 9.0), (11.1652, 11.0), (0.0, 0.0), (17.999, 18.0),
    ])
    def test_values(self, value, expected):
        assert round_half_away(np.array([value]))[0] == expected

    def test_differs_from_bankers_rounding(self):
        assert np.round(2.5) == 2.0
        assert round_half_away(np.array([2.5]))[0] == 3.0


class TestAccuracies:
    """Single-sample readings from published predictions"""

    @pytest.mark.parametrize("pred,label,correct", [
        (11.1652, 11, True),
        (8.6814, 9, True),
        (4.49, 5, False),
        (5.99666, 6, True),
        (4.23593, 4, True),
        (9.84883, 10, True),
    ])
    def test_rounding(self, pred, label, correct):
        assert accuracy_rounding([pred], [label]) == (1.0 if correct else 0.0)

    @pytest.mark.parametrize("pred,label,correct", [
        (8.6814, 9, True),
        (10.0746, 10, True),
        (6.2, 8, False),
        (4.49, 5, True),
        (7.0, 7, True),
    ])
    def test_floor_ceiling(self, pred, label, correct):
        assert accuracy_floor_ceiling([pred], [label]) == (1.0 if correct else 0.0)

    @pytest.mark.parametrize("pred,label,correct", [
        (5.99666, 6, True),
        (4.23593, 4, True),
        (9.0, 11, False),
        (9.6, 11, True),
        (6.2, 8, False),
    ])
    def test_within_one(self, pred, label, correct):
        assert accuracy_within_one([pred], [label]) == (1.0 if correct else 0.0)

    def test_fractions(self):
        preds = [11.1652, 8.6814, 4.49, 6.2]
        labels = [11, 9, 5, 8]
        assert accuracy_rounding(preds, labels) == 0.5
        assert accuracy_floor_ceiling(preds, labels) == 0.75
        assert accuracy_within_one(preds, labels) == 0.75

    def test_empty(self):
        assert accuracy_rounding([], []) == 0.0

    @pytest.mark.parametrize("metric", [accuracy_rounding, accuracy_floor_ceiling, accuracy_within_one,
                                        mean_squared_error])
    def test_length_mismatch(self, metric):
        with pytest.raises(LengthMismatch):
            metric([1.0, 2.0], [1.0])

    def test_monotonicity_against_recount(self):
        """round <= floor/ceil <= within one, checked against plain Python counting"""
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(1, 30))
            labels = rng.integers(0, 19, size=n)
            preds = labels + rng.normal(scale=rng.uniform(0.1, 3.0), size=n)

            rounded = [math.copysign(math.floor(abs(p) + 0.5), p) for p in preds]
            by_round = sum(r == y for r, y in zip(rounded, labels)) / n
            by_floorceil = sum(math.floor(p) == y or math.ceil(p) == y for p, y in zip(preds, labels)) / n
            by_pm1 = sum(abs(r - y) <= 1 for r, y in zip(rounded, labels)) / n

            a = accuracy_rounding(preds, labels)
            b = accuracy_floor_ceiling(preds, labels)
            c = accuracy_within_one(preds, labels)
            assert (a, b, c) == (by_round, by_floorceil, by_pm1)
            assert a <= b <= c


class TestMeanSquaredError:
    def test_single(self):
        assert mean_squared_error([9.84883], [10]) == pytest.approx((10 - 9.84883) ** 2)

    def test_against_loop(self):
        rng = np.random.default_rng(1)
        preds = rng.normal(size=50) * 5 + 9
        labels = rng.integers(0, 19, size=50)
        expected = sum((p - y) ** 2 for p, y in zip(preds, labels)) / 50
        assert mean_squared_error(preds, labels) == pytest.approx(expected, rel=1e-12)


class TestBreakdowns:
    """Per-pair and per-sum tallies of a test fold"""

    @pytest.fixture
    def dataset(self, mnist_test, test_index):
        pairs = [PermutationPair(1, 3), PermutationPair(2, 2), PermutationPair(4, 0), PermutationPair(9, 9)]
        return generate_pair_dataset(pairs, mnist_test, test_index, m=4, seed=3)

    def test_perfect_predictions(self, dataset):
        rows = pair_breakdown(dataset, dataset.labels.astype(float))
        assert [(r.p1, r.p2) for r in rows] == [(1, 3), (2, 2), (4, 0), (9, 9)]
        assert all(r.samples == 4 and r.correct_round == 4 for r in rows)

    def test_counts_add_up_to_fold_totals(self, dataset):
        rng = np.random.default_rng(2)
        preds = dataset.labels + rng.normal(scale=1.0, size=len(dataset))
        rows = pair_breakdown(dataset, preds)
        assert sum(r.samples for r in rows) == len(dataset)
        assert sum(r.correct_round for r in rows) / len(dataset) == accuracy_rounding(preds, dataset.labels)
        assert sum(r.correct_floorceil for r in rows) / len(dataset) == accuracy_floor_ceiling(preds, dataset.labels)
        assert sum(r.correct_pm1 for r in rows) / len(dataset) == accuracy_within_one(preds, dataset.labels)

    def test_mean_prediction(self, dataset):
        preds = np.arange(len(dataset), dtype=float)
        rows = pair_breakdown(dataset, preds)
        for row in rows:
            mask = dataset.pair_mask(PermutationPair(row.p1, row.p2))
            assert row.mean_prediction == pytest.approx(preds[mask].mean())

    def test_reverse_in_train(self, dataset):
        rows = pair_breakdown(dataset, dataset.labels.astype(float),
                              train_pairs=[PermutationPair(3, 1), PermutationPair(0, 4)])
        flags = {(r.p1, r.p2): r.reverse_in_train for r in rows}
        assert flags == {(1, 3): True, (2, 2): False, (4, 0): True, (9, 9): False}

    def test_sum_groups(self, dataset):
        rows = sum_breakdown(dataset, dataset.labels.astype(float))
        by_label = {r.label: r for r in rows}
        assert sorted(by_label) == [4, 18]
        assert sorted(by_label[4].pairs) == [(1, 3), (2, 2), (4, 0)]
        assert by_label[4].samples == 12
        assert by_label[18].correct_round == 4

    def test_length_mismatch(self, dataset):
        with pytest.raises(LengthMismatch):
            pair_breakdown(dataset, np.zeros(3))
