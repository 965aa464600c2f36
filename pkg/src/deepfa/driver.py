"""Experiment orchestration: baseline, one-shot propagation, and the full loop.

Modes
-----
* ``baseline``: train the extractor on S only, evaluate on T, ignore U.
* ``deepfa``: one round of extract -> project -> propagate -> retrain.
* ``deepfa-loop``: the same round repeated ``iterations`` times (default 5).

Every iteration re-runs the projection from scratch with seed
``base_seed + iteration`` and retrains the extractor from a fresh seeded
initialization (warm starts available behind ``ExtractorSpec.warm_start``),
so trajectories are deterministic functions of (dataset, config).

Run directory layout (written when an output directory is given)::

    <out>/<mode>/<x>/<partition>/iter<t>/{embedding.csv, labels.csv,
                                          confidence.csv, metrics.json}
    <out>/summary.json
"""

from __future__ import annotations

import csv
import dataclasses
import json
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from .data import (
    Dataset,
    SplitAssignment,
    SplitSpec,
    SUPERVISED,
    TEST,
    UNSUPERVISED,
    stratified_split,
)
from .errors import ComponentError, DataError, SpecError
from .extractor import (
    EXTERNAL,
    ExtractorSpec,
    extract_features,
    predict,
    train_extractor,
)
from .metrics import AggregateRecord, MetricRecord, aggregate
from .opf import SeedSet, confidence, propagate_labels, write_propagation_csv
from .tsne import TsneParams, tsne_embed, write_embedding_csv

BASELINE = "baseline"
DEEPFA = "deepfa"
DEEPFA_LOOP = "deepfa-loop"
MODES = (BASELINE, DEEPFA, DEEPFA_LOOP)

DEFAULT_LOOP_ITERATIONS = 5


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs besides the dataset itself."""

    mode: str
    split: SplitSpec
    tsne: TsneParams = TsneParams()
    extractor: ExtractorSpec = ExtractorSpec()
    iterations: int | None = None
    base_seed: int = 0
    partitions: int = 3

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise SpecError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.partitions < 1:
            raise SpecError("partitions must be >= 1")
        if self.iterations is not None and self.iterations < 0:
            raise SpecError("iterations must be >= 0")
        if self.mode == BASELINE and self.iterations not in (None, 0):
            raise SpecError("baseline mode forces iterations = 0")
        if self.mode == DEEPFA and self.iterations not in (None, 1):
            raise SpecError("deepfa mode forces iterations = 1")

    @property
    def resolved_iterations(self) -> int:
        if self.mode == BASELINE:
            return 0
        if self.mode == DEEPFA:
            return 1
        return DEFAULT_LOOP_ITERATIONS if self.iterations is None else self.iterations


@dataclass
class IterationRecord:
    """Metrics plus propagation artifacts for one iteration of one partition."""

    iteration: int
    seed: int
    metrics: MetricRecord
    train_ids: list[str] | None = None
    embedding: np.ndarray | None = None
    assigned_labels: np.ndarray | None = None
    confidence: np.ndarray | None = None
    supervised_mask: np.ndarray | None = None
    costs: np.ndarray | None = None


@dataclass
class PartitionResult:
    partition: int
    split: SplitAssignment
    iterations: list[IterationRecord] = field(default_factory=list)
    error: str | None = None


@dataclass
class RunResult:
    """All partitions of one (mode, x) experiment plus per-iteration aggregates."""

    mode: str
    x: float
    config: ExperimentConfig
    partitions: list[PartitionResult]

    def aggregates(self) -> dict[int, AggregateRecord]:
        by_iter: dict[int, list[MetricRecord]] = {}
        for part in self.partitions:
            for rec in part.iterations:
                by_iter.setdefault(rec.iteration, []).append(rec.metrics)
        return {t: aggregate(records) for t, records in sorted(by_iter.items())}

    @property
    def final_iteration(self) -> int:
        return max((rec.iteration for part in self.partitions
                    for rec in part.iterations), default=0)


def _audit_test_isolation(dataset: Dataset, split: SplitAssignment,
                          train_idx: np.ndarray) -> None:
    test_ids = {dataset.ids[i] for i in split.indices(TEST)}
    leaked = test_ids & {dataset.ids[i] for i in train_idx}
    if leaked:
        raise ComponentError(f"test samples leaked into training: {sorted(leaked)[:5]}")


def _evaluate(model, dataset: Dataset, split: SplitAssignment,
              prop_acc: float | None) -> MetricRecord:
    t_idx = split.indices(TEST)
    result = predict(model, dataset.features[t_idx])
    truth = dataset.labels[t_idx]
    return MetricRecord(
        accuracy=metrics_mod.accuracy(result.predicted_label, truth),
        kappa=metrics_mod.cohens_kappa(result.predicted_label, truth),
        propagation_accuracy=prop_acc,
    )


def _train(dataset: Dataset, cfg: ExperimentConfig, train_idx: np.ndarray,
           labels: np.ndarray, supervised: np.ndarray, iteration: int,
           partition: int, out_dir: Path | None, previous=None):
    spec = replace(cfg.extractor, seed=cfg.extractor.seed + iteration)
    workdir = None
    if spec.kind == EXTERNAL:
        base = out_dir if out_dir is not None else Path(
            tempfile.mkdtemp(prefix="deepfa-extractor-"))
        workdir = base / f"extractor_p{partition}_t{iteration}"
    return train_extractor(
        dataset.features[train_idx], labels, spec,
        ids=[dataset.ids[i] for i in train_idx],
        supervised=supervised,
        class_names=dataset.class_names,
        workdir=workdir,
        previous=previous,
    )


def _run_partition(
    dataset: Dataset,
    cfg: ExperimentConfig,
    partition: int,
    out_dir: Path | None,
) -> PartitionResult:
    split = stratified_split(
        dataset, replace(cfg.split, seed=cfg.split.seed + partition))
    result = PartitionResult(partition=partition, split=split)
    try:
        s_idx = split.indices(SUPERVISED)
        u_idx = split.indices(UNSUPERVISED)
        train_idx = np.sort(np.concatenate([s_idx, u_idx]))
        _audit_test_isolation(dataset, split, train_idx)

        # iteration 0: supervised-only training, the baseline-equivalent record
        model = _train(dataset, cfg, s_idx, dataset.labels[s_idx],
                       np.ones(s_idx.size, dtype=bool), 0, partition, out_dir)
        rec = IterationRecord(
            iteration=0,
            seed=cfg.base_seed,
            metrics=_evaluate(model, dataset, split, None),
        )
        result.iterations.append(rec)
        _write_iteration(dataset, cfg, rec, partition, out_dir)

        supervised_pos = np.isin(train_idx, s_idx)
        for t in range(1, cfg.resolved_iterations + 1):
            feats = extract_features(model, dataset.features[train_idx])
            emb = tsne_embed(feats, replace(cfg.tsne, seed=cfg.base_seed + t))
            seeds = SeedSet(
                indices=np.flatnonzero(supervised_pos),
                labels=dataset.labels[train_idx[supervised_pos]],
            )
            forest = propagate_labels(emb, seeds, n_classes=dataset.n_classes)
            conf = confidence(forest.class_costs, forest.assigned_label,
                              supervised_pos)

            train_labels = forest.assigned_label.copy()
            train_labels[supervised_pos] = dataset.labels[train_idx[supervised_pos]]

            u_pos = ~supervised_pos
            prop_acc = metrics_mod.propagation_accuracy(
                train_labels[u_pos], dataset.labels[train_idx[u_pos]])

            model = _train(dataset, cfg, train_idx, train_labels,
                           supervised_pos, t, partition, out_dir,
                           previous=model)
            rec = IterationRecord(
                iteration=t,
                seed=cfg.base_seed + t,
                metrics=_evaluate(model, dataset, split, prop_acc),
                train_ids=[dataset.ids[i] for i in train_idx],
                embedding=emb,
                assigned_labels=train_labels,
                confidence=conf.values,
                supervised_mask=supervised_pos,
                costs=forest.cost,
            )
            result.iterations.append(rec)
            _write_iteration(dataset, cfg, rec, partition, out_dir)
    except (DataError, ComponentError) as exc:
        result.error = f"{type(exc).__name__}: {exc}"
    return result


# -- persistence -----------------------------------------------------------------


def format_x(x: float) -> str:
    return f"{x:g}"


def _iteration_dir(out_dir: Path, cfg: ExperimentConfig, partition: int,
                   iteration: int) -> Path:
    return (out_dir / cfg.mode / format_x(cfg.split.x) / str(partition)
            / f"iter{iteration}")


def _write_iteration(dataset: Dataset, cfg: ExperimentConfig,
                     rec: IterationRecord, partition: int,
                     out_dir: Path | None) -> None:
    if out_dir is None:
        return
    dest = _iteration_dir(out_dir, cfg, partition, rec.iteration)
    dest.mkdir(parents=True, exist_ok=True)
    payload = {
        "accuracy": rec.metrics.accuracy,
        "kappa": rec.metrics.kappa,
        "propagation_accuracy": rec.metrics.propagation_accuracy,
        "iteration": rec.iteration,
        "seed": rec.seed,
    }
    (dest / "metrics.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    if rec.embedding is not None:
        write_embedding_csv(dest / "embedding.csv", rec.train_ids, rec.embedding)
        write_propagation_csv(
            dest / "labels.csv",
            rec.train_ids,
            [dataset.class_names[int(c)] for c in rec.assigned_labels],
            rec.costs,
            rec.confidence,
            rec.supervised_mask,
        )
        with open(dest / "confidence.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "confidence"])
            for sid, v in zip(rec.train_ids, rec.confidence):
                writer.writerow([sid, repr(float(v))])


def _aggregate_payload(agg: AggregateRecord) -> dict:
    return {
        "accuracy_mean": agg.accuracy_mean,
        "accuracy_std": agg.accuracy_std,
        "kappa_mean": agg.kappa_mean,
        "kappa_std": agg.kappa_std,
        "propagation_mean": agg.propagation_mean,
        "propagation_std": agg.propagation_std,
        "partition_count": agg.partition_count,
    }


def write_summary(results: list[RunResult], dataset: Dataset,
                  out_dir: str | Path) -> Path:
    """Write ``summary.json`` describing every run under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs = []
    for res in results:
        runs.append({
            "mode": res.mode,
            "x": res.x,
            "partitions": len(res.partitions),
            "errors": [p.error for p in res.partitions if p.error],
            "final_iteration": res.final_iteration,
            "iterations": {
                str(t): _aggregate_payload(agg)
                for t, agg in res.aggregates().items()
            },
        })
    payload = {"dataset": dataset.name, "runs": runs}
    path = out_dir / "summary.json"
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")
    return path


# -- run entry points ---------------------------------------------------------------


def run_experiment(
    dataset: Dataset,
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    threads: int = 1,
) -> RunResult:
    """Run one experiment (all partitions) and return its RunResult."""
    out_path = Path(out_dir) if out_dir is not None else None
    parts = list(range(cfg.partitions))
    if threads > 1 and cfg.partitions > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partition_results = list(
                pool.map(lambda p: _run_partition(dataset, cfg, p, out_path), parts))
    else:
        partition_results = [_run_partition(dataset, cfg, p, out_path)
                             for p in parts]
    failed = [p for p in partition_results if p.error]
    if len(failed) == len(partition_results):
        raise ComponentError(
            f"all partitions failed; first error: {failed[0].error}")
    return RunResult(mode=cfg.mode, x=cfg.split.x, config=cfg,
                     partitions=partition_results)


def run_baseline(dataset: Dataset, cfg: ExperimentConfig,
                 out_dir: str | Path | None = None, threads: int = 1) -> RunResult:
    if cfg.mode != BASELINE:
        raise SpecError(f"run_baseline requires mode={BASELINE!r}")
    return run_experiment(dataset, cfg, out_dir, threads)


def run_deepfa(dataset: Dataset, cfg: ExperimentConfig,
               out_dir: str | Path | None = None, threads: int = 1) -> RunResult:
    if cfg.mode not in (DEEPFA, DEEPFA_LOOP):
        raise SpecError(f"run_deepfa requires mode in {(DEEPFA, DEEPFA_LOOP)}")
    return run_experiment(dataset, cfg, out_dir, threads)


def run_grid(
    dataset: Dataset,
    x_values: list[float],
    modes: list[str],
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    threads: int = 1,
) -> list[RunResult]:
    """Cartesian product of modes and supervised fractions, in stable order."""
    if not x_values:
        raise SpecError("x_values must be non-empty")
    results = []
    for mode in modes:
        for x in x_values:
            run_cfg = replace(
                cfg,
                mode=mode,
                iterations=None if mode in (BASELINE, DEEPFA) else cfg.iterations,
                split=replace(cfg.split, x=x),
            )
            results.append(run_experiment(dataset, run_cfg, out_dir, threads))
    if out_dir is not None:
        write_summary(results, dataset, out_dir)
    return results


# -- config (de)serialization ---------------------------------------------------------


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from JSON whose keys mirror the field names."""
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise SpecError(f"unknown config keys: {sorted(unknown)}")
    if "split" not in raw:
        raise SpecError("config requires a 'split' section")
    kwargs = dict(raw)
    try:
        kwargs["split"] = SplitSpec(**kwargs["split"])
        if "tsne" in kwargs:
            kwargs["tsne"] = TsneParams(**kwargs["tsne"])
        if "extractor" in kwargs:
            kwargs["extractor"] = ExtractorSpec(**kwargs["extractor"])
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise SpecError(f"bad config: {exc}") from None
