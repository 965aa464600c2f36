"""Semi-supervised label propagation by minimum bottleneck-cost path forests.

Every sample is a node of the complete graph weighted by Euclidean distance;
the cost of a path is the maximum arc weight along it. Supervised samples
act as seeds with cost 0, and each remaining sample receives the label of
the seed it can reach with the smallest bottleneck cost. The forest is grown
with a dense Dijkstra-style scan (O(n^2) time, O(n) extra space per class),
so the n^2 arcs are never materialized.

Ties are broken deterministically: the frontier is ordered by
(cost, insertion sequence), and a relaxation only replaces a path on a
strict cost improvement, so among equal-cost paths the earlier one wins.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, SeedError

NONE_INDEX = -1

_ORACLE_MAX_N = 256


@dataclass(frozen=True)
class SeedSet:
    """Supervised sample indices and their class labels."""

    indices: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        indices = np.asarray(self.indices, dtype=np.int64)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "labels", labels)
        if indices.size == 0:
            raise SeedError("seed set is empty")
        if indices.shape != labels.shape:
            raise SeedError("seed indices and labels must have equal length")
        if len(np.unique(indices)) != indices.size:
            raise SeedError("seed indices must be unique")
        if labels.min() < 0:
            raise SeedError("seed labels must be non-negative class indices")

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1


@dataclass(frozen=True)
class PathForest:
    """Output of propagation over one point set.

    ``predecessor`` is NONE_INDEX for seeds; ``root`` holds the seed sample
    index whose tree contains each sample; ``class_costs`` row k is the
    bottleneck cost to the nearest class-k seed.
    """

    predecessor: np.ndarray      # (n,) int
    cost: np.ndarray             # (n,) float
    root: np.ndarray             # (n,) int
    assigned_label: np.ndarray   # (n,) int
    class_costs: np.ndarray      # (K, n) float


@dataclass(frozen=True)
class ConfidenceVector:
    """Per-sample propagation confidence in [0, 1]; supervised samples get 1."""

    values: np.ndarray


def _check_points(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise DimensionError("points must be an (n, d) matrix")
    if not np.isfinite(points).all():
        raise DimensionError("points contain non-finite values")
    return points


def _check_seeds(points: np.ndarray, seeds: SeedSet, n_classes: int) -> None:
    n = points.shape[0]
    if seeds.indices.min() < 0 or seeds.indices.max() >= n:
        raise SeedError("seed index out of range")
    present = np.unique(seeds.labels)
    missing = sorted(set(range(n_classes)) - set(int(c) for c in present))
    if missing:
        raise SeedError(f"classes without any seed: {missing}")


def _grow_forest(
    points: np.ndarray,
    seed_indices: np.ndarray,
    seed_labels: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Dense bottleneck Dijkstra from a set of zero-cost seeds.

    Returns (cost, predecessor, root, label) arrays. The frontier key is
    (cost, insertion sequence); sequence numbers increase with every queue
    insertion, which makes equal-cost processing FIFO and fully deterministic.
    """
    n = points.shape[0]
    cost = np.full(n, np.inf)
    seq = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    pred = np.full(n, NONE_INDEX, dtype=np.int64)
    root = np.full(n, NONE_INDEX, dtype=np.int64)
    label = np.full(n, NONE_INDEX, dtype=np.int64)
    done = np.zeros(n, dtype=bool)

    cost[seed_indices] = 0.0
    seq[seed_indices] = np.arange(len(seed_indices))
    root[seed_indices] = seed_indices
    label[seed_indices] = seed_labels
    counter = len(seed_indices)

    for _ in range(n):
        # pop the unfinished node with the smallest (cost, sequence) key
        active = ~done
        masked_cost = np.where(active, cost, np.inf)
        best = masked_cost.min()
        if not np.isfinite(best):
            break  # unreachable remainder (cannot happen on a complete graph)
        candidates = np.flatnonzero(active & (cost == best))
        u = int(candidates[np.argmin(seq[candidates])])
        done[u] = True

        arc = np.sqrt(((points - points[u]) ** 2).sum(axis=1))
        new_cost = np.maximum(cost[u], arc)
        improved = np.flatnonzero(~done & (new_cost < cost))
        if improved.size:
            cost[improved] = new_cost[improved]
            pred[improved] = u
            root[improved] = root[u]
            label[improved] = label[u]
            seq[improved] = counter + np.arange(improved.size)
            counter += improved.size
    return cost, pred, root, label


def propagate_labels(
    points: np.ndarray,
    seeds: SeedSet,
    n_classes: int | None = None,
) -> PathForest:
    """Assign every sample the label of its minimum-bottleneck-cost seed."""
    points = _check_points(points)
    k = seeds.n_classes if n_classes is None else int(n_classes)
    _check_seeds(points, seeds, k)
    cost, pred, root, label = _grow_forest(points, seeds.indices, seeds.labels)
    class_costs = per_class_costs(points, seeds, n_classes=k)
    return PathForest(
        predecessor=pred,
        cost=cost,
        root=root,
        assigned_label=label,
        class_costs=class_costs,
    )


def per_class_costs(
    points: np.ndarray,
    seeds: SeedSet,
    n_classes: int | None = None,
) -> np.ndarray:
    """Bottleneck costs as if only one class's seeds existed, per class.

    The column-wise minimum over classes equals the combined forest's costs
    exactly: both reduce the same set of arc weights with max/min only.
    """
    points = _check_points(points)
    k = seeds.n_classes if n_classes is None else int(n_classes)
    _check_seeds(points, seeds, k)
    n = points.shape[0]
    out = np.empty((k, n), dtype=np.float64)
    for c in range(k):
        members = seeds.indices[seeds.labels == c]
        cost, _, _, _ = _grow_forest(points, members, np.full(members.size, c))
        out[c] = cost
    return out


def confidence(
    class_costs: np.ndarray,
    assigned_label: np.ndarray,
    supervised_mask: np.ndarray,
) -> ConfidenceVector:
    """Margin between the best and best-competing class bottleneck costs.

    For an unsupervised sample with best-class cost c1 and best competing
    cost c2, the raw margin c2 / (c1 + c2) lies in [1/2, 1]; it is rescaled
    to 2*raw - 1 in [0, 1]. A tie (c1 = c2 = 0 with a competitor) scores 0;
    with a single class there is no competitor and the score is 1.
    Supervised samples always score 1.
    """
    class_costs = np.asarray(class_costs, dtype=np.float64)
    assigned_label = np.asarray(assigned_label, dtype=np.int64)
    supervised_mask = np.asarray(supervised_mask, dtype=bool)
    k, n = class_costs.shape
    if assigned_label.shape != (n,) or supervised_mask.shape != (n,):
        raise DimensionError("confidence inputs disagree on n")

    values = np.ones(n, dtype=np.float64)
    if k > 1:
        cols = np.arange(n)
        c1 = class_costs[assigned_label, cols]
        competitors = class_costs.copy()
        competitors[assigned_label, cols] = np.inf
        c2 = competitors.min(axis=0)
        total = c1 + c2
        raw = np.divide(c2, total, out=np.full(n, 0.5), where=total > 0.0)
        values = 2.0 * raw - 1.0
    values[supervised_mask] = 1.0
    return ConfidenceVector(values=values)


def minimax_oracle(
    points: np.ndarray,
    seeds: SeedSet,
    n_classes: int | None = None,
) -> np.ndarray:
    """Exact per-class bottleneck costs by Floyd-Warshall-style closure.

    Test oracle only (n <= 256): closes cost[i][j] over
    min(cost[i][j], max(cost[i][k], cost[k][j])) on the full distance matrix,
    then takes the per-class minimum over seed rows.
    """
    points = _check_points(points)
    n = points.shape[0]
    if n > _ORACLE_MAX_N:
        raise DimensionError(f"oracle limited to n <= {_ORACLE_MAX_N}, got {n}")
    k = seeds.n_classes if n_classes is None else int(n_classes)
    _check_seeds(points, seeds, k)

    closure = np.sqrt(np.maximum(
        ((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2), 0.0))
    for mid in range(n):
        via = np.maximum.outer(closure[:, mid], closure[mid, :])
        closure = np.minimum(closure, via)
    out = np.empty((k, n), dtype=np.float64)
    for c in range(k):
        members = seeds.indices[seeds.labels == c]
        out[c] = closure[members].min(axis=0)
    return out


def write_propagation_csv(
    path: str | Path,
    ids,
    label_names,
    cost: np.ndarray,
    conf: np.ndarray,
    supervised: np.ndarray,
) -> None:
    """Propagated-labels export: CSV ``id,assigned_label,cost,confidence,supervised``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "assigned_label", "cost", "confidence", "supervised"])
        for sid, name, c, v, sup in zip(ids, label_names, cost, conf, supervised):
            writer.writerow([sid, name, repr(float(c)), repr(float(v)), int(sup)])
