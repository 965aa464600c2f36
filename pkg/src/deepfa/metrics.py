"""Evaluation metrics: accuracy, Cohen's kappa, propagation accuracy.

All functions are pure; ``aggregate`` summarizes per-partition records with
the arithmetic mean and the population standard deviation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True)
class MetricRecord:
    """Metrics for one partition at one iteration.

    ``propagation_accuracy`` is None for runs that never propagate labels
    (the baseline experiment, and iteration 0 of every run).
    """

    accuracy: float
    kappa: float
    propagation_accuracy: float | None = None


@dataclass(frozen=True)
class AggregateRecord:
    """Mean and population standard deviation of each metric over partitions."""

    accuracy_mean: float
    accuracy_std: float
    kappa_mean: float
    kappa_std: float
    propagation_mean: float | None
    propagation_std: float | None
    partition_count: int


def _check_pair(predicted, truth) -> tuple[np.ndarray, np.ndarray]:
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape or predicted.ndim != 1:
        raise DimensionError(
            f"label vectors must be 1-D and equal length, got {predicted.shape} "
            f"vs {truth.shape}"
        )
    if predicted.size == 0:
        raise DimensionError("label vectors must be non-empty")
    return predicted, truth


def accuracy(predicted, truth) -> float:
    """Fraction of positions where predicted equals truth."""
    predicted, truth = _check_pair(predicted, truth)
    return float(np.mean(predicted == truth))


def cohens_kappa(predicted, truth) -> float:
    """Chance-corrected agreement (p_o - p_e) / (1 - p_e).

    p_e is the marginal agreement probability sum_k row_k * col_k / n^2.
    When p_e = 1 (both marginals concentrated on one class) the value is 1
    for perfect agreement and 0 otherwise, avoiding the 0/0 form.
    """
    predicted, truth = _check_pair(predicted, truth)
    n = predicted.size
    p_o = float(np.mean(predicted == truth))
    values = np.union1d(predicted, truth)
    pred_counts = np.array([(predicted == v).sum() for v in values], dtype=np.float64)
    true_counts = np.array([(truth == v).sum() for v in values], dtype=np.float64)
    p_e = float(np.dot(pred_counts, true_counts)) / (n * n)
    if p_e >= 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


def propagation_accuracy(assigned_u, truth_u) -> float:
    """Correctly propagated labels over |U|; both vectors cover U only."""
    return accuracy(assigned_u, truth_u)


def aggregate(records: list[MetricRecord]) -> AggregateRecord:
    """Mean and population std of a non-empty record list.

    Records must agree on whether propagation accuracy is present.
    """
    if not records:
        raise DimensionError("cannot aggregate an empty record list")
    present = [r.propagation_accuracy is not None for r in records]
    if any(present) != all(present):
        raise DimensionError("records mix present and absent propagation accuracy")

    def mean_std(values: list[float]) -> tuple[float, float]:
        arr = np.asarray(values, dtype=np.float64)
        return float(arr.mean()), float(arr.std())  # population std (ddof=0)

    acc_mean, acc_std = mean_std([r.accuracy for r in records])
    kap_mean, kap_std = mean_std([r.kappa for r in records])
    if all(present):
        prop_mean, prop_std = mean_std([r.propagation_accuracy for r in records])
    else:
        prop_mean = prop_std = None
    return AggregateRecord(
        accuracy_mean=acc_mean,
        accuracy_std=acc_std,
        kappa_mean=kap_mean,
        kappa_std=kap_std,
        propagation_mean=prop_mean,
        propagation_std=prop_std,
        partition_count=len(records),
    )
