"""
Regression metrics read as classification accuracies, plus per-pair and
per-sum breakdowns of a fold's test predictions
"""

from typing import Iterable, List

import numpy as np

from .errors import LengthMismatch
from .models import PairBreakdown, SumBreakdown
from .pair_generator import PairDataset, PermutationPair


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round to the nearest integer, ties away from zero (np.round rounds ties to even)"""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _as_vectors(predictions, labels):
    predictions = np.asarray(predictions, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels, dtype=np.float64).reshape(-1)
    if predictions.shape[0] != labels.shape[0]:
        raise LengthMismatch(predictions.shape[0], labels.shape[0])
    return predictions, labels


def correct_rounding(predictions, labels) -> np.ndarray:
    predictions, labels = _as_vectors(predictions, labels)
    return round_half_away(predictions) == labels


def correct_floor_ceiling(predictions, labels) -> np.ndarray:
    predictions, labels = _as_vectors(predictions, labels)
    return (np.floor(predictions) == labels) | (np.ceil(predictions) == labels)


def correct_within_one(predictions, labels) -> np.ndarray:
    predictions, labels = _as_vectors(predictions, labels)
    return np.abs(round_half_away(predictions) - labels) <= 1


def _fraction(mask: np.ndarray) -> float:
    # count / total, so per-pair counts reproduce the fold accuracy exactly
    return int(mask.sum()) / mask.size if mask.size else 0.0


def accuracy_rounding(predictions, labels) -> float:
    return _fraction(correct_rounding(predictions, labels))


def accuracy_floor_ceiling(predictions, labels) -> float:
    return _fraction(correct_floor_ceiling(predictions, labels))


def accuracy_within_one(predictions, labels) -> float:
    return _fraction(correct_within_one(predictions, labels))


def mean_squared_error(predictions, labels) -> float:
    predictions, labels = _as_vectors(predictions, labels)
    if predictions.size == 0:
        return 0.0
    diff = predictions - labels
    return float(np.mean(diff * diff))


def pair_breakdown(dataset: PairDataset, predictions: np.ndarray,
                   train_pairs: Iterable[PermutationPair] = ()) -> List[PairBreakdown]:
    """One row per pair present in ``dataset``, in pair order"""
    predictions, labels = _as_vectors(predictions, dataset.labels)
    masks = {
        'round': correct_rounding(predictions, labels),
        'floorceil': correct_floor_ceiling(predictions, labels),
        'pm1': correct_within_one(predictions, labels),
    }
    trained = {PermutationPair(*p) for p in train_pairs}

    rows = []
    for pair in dataset.pairs_covered:
        selected = dataset.pair_mask(pair)
        n = int(selected.sum())
        rows.append(PairBreakdown(
            p1=pair.p1, p2=pair.p2, samples=n,
            correct_round=int(masks['round'][selected].sum()),
            correct_floorceil=int(masks['floorceil'][selected].sum()),
            correct_pm1=int(masks['pm1'][selected].sum()),
            mean_prediction=float(predictions[selected].mean()) if n else 0.0,
            reverse_in_train=pair.reversed() in trained,
        ))
    return rows


def sum_breakdown(dataset: PairDataset, predictions: np.ndarray) -> List[SumBreakdown]:
    """Test samples grouped by label, e.g. (6,6) and (4,8) both under 12"""
    predictions, labels = _as_vectors(predictions, dataset.labels)
    masks = (
        correct_rounding(predictions, labels),
        correct_floor_ceiling(predictions, labels),
        correct_within_one(predictions, labels),
    )
    rows = []
    for label in sorted({p.label for p in dataset.pairs_covered}):
        selected = labels == label
        n = int(selected.sum())
        rows.append(SumBreakdown(
            label=label,
            pairs=[tuple(p) for p in dataset.pairs_covered if p.label == label],
            samples=n,
            correct_round=int(masks[0][selected].sum()),
            correct_floorceil=int(masks[1][selected].sum()),
            correct_pm1=int(masks[2][selected].sum()),
            mean_prediction=float(predictions[selected].mean()) if n else 0.0,
        ))
    return rows
