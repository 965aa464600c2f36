"""Trainable feature extractors: a builtin MLP and an external-process client.

The builtin stand-in is a one-hidden-layer network (input -> rectified
hidden -> softmax); its hidden activations play the role of the deep
model's last pooling-layer features at desk scale. Training is plain SGD
with momentum and a learning rate decaying linearly to zero, mirroring the
schedule used to drive external models.

External extractors are separate processes speaking a small file protocol:

* ``<cmd> train --features in.dfa --labels labels.csv --model dir
  --epochs N --lr R --momentum M --seed S`` (exit 0 on success),
* ``<cmd> extract --model dir --features in.dfa --out out.dfa``,
* ``<cmd> predict --model dir --features in.dfa --out probs.csv`` with
  CSV header ``id,p0,...,pK-1`` and ids equal to 0-based input row indices.

Feature files use the ``DFA1`` binary format from :mod:`deepfa.data`.
"""

from __future__ import annotations

import csv
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import read_feature_matrix, write_feature_matrix, write_labels_csv
from .errors import (
    DimensionError,
    DivergenceError,
    ExtractorError,
    ProtocolError,
    SpecError,
)

BUILTIN = "builtin-mlp"
EXTERNAL = "external"

DEFAULT_LR_BUILTIN = 1e-3
DEFAULT_LR_EXTERNAL = 1e-4  # fine-tuning rate for pretrained external models


@dataclass(frozen=True)
class ExtractorSpec:
    """Extractor kind and optimizer hyper-parameters."""

    kind: str = BUILTIN
    hidden_width: int = 128
    epochs: int = 100
    lr_initial: float | None = None   # resolved per kind when left unset
    momentum: float = 0.9
    batch_size: int = 32
    seed: int = 0
    warm_start: bool = False
    external_command: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in (BUILTIN, EXTERNAL):
            raise SpecError(f"unknown extractor kind {self.kind!r}")
        if self.epochs < 1:
            raise SpecError("epochs must be >= 1")
        if self.lr_initial is not None and self.lr_initial <= 0:
            raise SpecError("lr_initial must be > 0")
        if not (0.0 <= self.momentum < 1.0):
            raise SpecError("momentum must be in [0, 1)")
        if self.batch_size < 1 or self.hidden_width < 1:
            raise SpecError("batch_size and hidden_width must be >= 1")
        if self.kind == EXTERNAL and not self.external_command:
            raise SpecError("external extractor requires external_command")

    @property
    def effective_lr(self) -> float:
        if self.lr_initial is not None:
            return self.lr_initial
        return DEFAULT_LR_BUILTIN if self.kind == BUILTIN else DEFAULT_LR_EXTERNAL


def learning_rate_at(spec: ExtractorSpec, epoch: int) -> float:
    """Linearly decaying rate: lr_initial * (1 - epoch / epochs), epoch 0-based."""
    return spec.effective_lr * (1.0 - epoch / spec.epochs)


# -- builtin one-hidden-layer network -------------------------------------------


@dataclass
class MlpModel:
    """Weights of the builtin network; hidden activations are its features."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    n_classes: int


@dataclass
class ExternalModel:
    """Handle on a trained external extractor: command plus its model directory."""

    command: tuple[str, ...]
    model_dir: Path
    workdir: Path


ExtractorModel = MlpModel | ExternalModel


@dataclass(frozen=True)
class PredictionResult:
    probabilities: np.ndarray     # (n, K), rows sum to 1
    predicted_label: np.ndarray   # (n,) argmax, ties -> lowest class index


def _init_mlp(rng: np.random.Generator, d: int, h: int, k: int) -> MlpModel:
    w1 = rng.normal(0.0, np.sqrt(2.0 / d), size=(d, h))
    w2 = rng.normal(0.0, np.sqrt(2.0 / h), size=(h, k))
    return MlpModel(w1=w1, b1=np.zeros(h), w2=w2, b2=np.zeros(k), n_classes=k)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _loss_and_grads(
    model: MlpModel, x: np.ndarray, y: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy and its gradients for one batch (float64)."""
    z1 = x @ model.w1 + model.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ model.w2 + model.b2
    shifted = z2 - z2.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_z - shifted[np.arange(len(y)), y]))

    probs = _softmax(z2)
    dz2 = probs.copy()
    dz2[np.arange(len(y)), y] -= 1.0
    dz2 /= len(y)
    da1 = dz2 @ model.w2.T
    dz1 = da1 * (z1 > 0.0)
    grads = {
        "w1": x.T @ dz1,
        "b1": dz1.sum(axis=0),
        "w2": a1.T @ dz2,
        "b2": dz2.sum(axis=0),
    }
    return loss, grads


def _train_builtin(
    raw: np.ndarray,
    labels: np.ndarray,
    spec: ExtractorSpec,
    init: MlpModel | None,
) -> MlpModel:
    x = np.asarray(raw, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    n, d = x.shape
    k = int(y.max()) + 1
    rng = np.random.default_rng(spec.seed)
    model = _init_mlp(rng, d, spec.hidden_width, k) if init is None else init
    velocity = {name: np.zeros_like(getattr(model, name))
                for name in ("w1", "b1", "w2", "b2")}
    for epoch in range(spec.epochs):
        lr = learning_rate_at(spec, epoch)
        perm = rng.permutation(n)
        for start in range(0, n, spec.batch_size):
            batch = perm[start:start + spec.batch_size]
            loss, grads = _loss_and_grads(model, x[batch], y[batch])
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite training loss at epoch {epoch}"
                )
            for name, grad in grads.items():
                velocity[name] = spec.momentum * velocity[name] - lr * grad
                setattr(model, name, getattr(model, name) + velocity[name])
    return model


# -- public operations ------------------------------------------------------------


def train_extractor(
    raw: np.ndarray,
    labels: np.ndarray,
    spec: ExtractorSpec,
    *,
    ids=None,
    supervised: np.ndarray | None = None,
    class_names=None,
    workdir: str | Path | None = None,
    previous: ExtractorModel | None = None,
) -> ExtractorModel:
    """Train (or retrain) an extractor on labeled feature rows.

    For the external kind, ``ids``, ``class_names`` and ``workdir`` are
    required to materialize the protocol files; ``supervised`` marks which
    labels are human-made (defaults to all). A failed external run raises
    without touching ``previous``.
    """
    raw = np.asarray(raw)
    labels = np.asarray(labels, dtype=np.int64)
    if raw.ndim != 2 or raw.shape[0] != labels.shape[0]:
        raise DimensionError("features and labels disagree on n")
    if not np.isfinite(raw).all():
        raise DimensionError("features contain non-finite values")

    if spec.kind == BUILTIN:
        init = None
        if spec.warm_start and isinstance(previous, MlpModel):
            init = MlpModel(
                w1=previous.w1.copy(), b1=previous.b1.copy(),
                w2=previous.w2.copy(), b2=previous.b2.copy(),
                n_classes=previous.n_classes,
            )
        return _train_builtin(raw, labels, spec, init)

    if ids is None or class_names is None or workdir is None:
        raise SpecError("external training needs ids, class_names, and workdir")
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    features_path = workdir / "train.dfa"
    labels_path = workdir / "train.labels.csv"
    model_dir = workdir / "model"
    write_feature_matrix(features_path, raw)
    if supervised is None:
        supervised = np.ones(len(labels), dtype=bool)
    write_labels_csv(labels_path, ids, [class_names[int(c)] for c in labels],
                     supervised)
    command = tuple(shlex.split(spec.external_command))
    _run_external(command, [
        "train",
        "--features", str(features_path),
        "--labels", str(labels_path),
        "--model", str(model_dir),
        "--epochs", str(spec.epochs),
        "--lr", repr(spec.effective_lr),
        "--momentum", repr(spec.momentum),
        "--seed", str(spec.seed),
    ])
    if not model_dir.exists():
        raise ProtocolError(f"{command[0]}: train exited 0 but wrote no model dir")
    return ExternalModel(command=command, model_dir=model_dir, workdir=workdir)


def extract_features(model: ExtractorModel, raw: np.ndarray) -> np.ndarray:
    """Feature rows for ``raw``: hidden activations (builtin) or the external
    ``extract`` verb's output."""
    raw = np.asarray(raw)
    if isinstance(model, MlpModel):
        if raw.shape[1] != model.w1.shape[0]:
            raise DimensionError(
                f"expected {model.w1.shape[0]} input features, got {raw.shape[1]}"
            )
        x = np.asarray(raw, dtype=np.float64)
        return np.maximum(x @ model.w1 + model.b1, 0.0)

    in_path = model.workdir / "extract_in.dfa"
    out_path = model.workdir / "extract_out.dfa"
    write_feature_matrix(in_path, raw)
    _run_external(model.command, [
        "extract",
        "--model", str(model.model_dir),
        "--features", str(in_path),
        "--out", str(out_path),
    ])
    feats = read_feature_matrix(out_path)
    if feats.shape[0] != raw.shape[0]:
        raise ProtocolError(
            f"{model.command[0]}: extract returned {feats.shape[0]} rows "
            f"for {raw.shape[0]} inputs"
        )
    return feats.astype(np.float64)


def predict(model: ExtractorModel, raw: np.ndarray) -> PredictionResult:
    """Class probabilities and argmax labels for ``raw``."""
    raw = np.asarray(raw)
    if isinstance(model, MlpModel):
        hidden = extract_features(model, raw)
        probs = _softmax(hidden @ model.w2 + model.b2)
        return PredictionResult(probs, np.argmax(probs, axis=1))

    in_path = model.workdir / "predict_in.dfa"
    out_path = model.workdir / "predict_out.csv"
    write_feature_matrix(in_path, raw)
    _run_external(model.command, [
        "predict",
        "--model", str(model.model_dir),
        "--features", str(in_path),
        "--out", str(out_path),
    ])
    probs = _read_probability_csv(out_path, model.command[0], raw.shape[0])
    return PredictionResult(probs, np.argmax(probs, axis=1))


def _run_external(command: tuple[str, ...], args: list[str]) -> None:
    try:
        proc = subprocess.run(
            list(command) + args,
            capture_output=True,
            text=True,
        )
    except OSError as exc:
        raise ExtractorError(f"cannot run extractor command {command[0]!r}: {exc}")
    if proc.returncode != 0:
        raise ExtractorError(
            f"extractor {command[0]!r} {args[0]} failed with exit "
            f"{proc.returncode}; stderr:\n{proc.stderr.strip()}"
        )


def _read_probability_csv(path: Path, cmd: str, expected_n: int) -> np.ndarray:
    if not path.exists():
        raise ProtocolError(f"{cmd}: predict exited 0 but wrote no output file")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0] != "id":
        raise ProtocolError(f"{cmd}: probability CSV must start with 'id,p0,...'")
    k = len(rows[0]) - 1
    if k < 1 or rows[0][1:] != [f"p{i}" for i in range(k)]:
        raise ProtocolError(f"{cmd}: malformed probability header {rows[0]!r}")
    body = [row for row in rows[1:] if row]
    if len(body) != expected_n:
        raise ProtocolError(
            f"{cmd}: predict returned {len(body)} rows for {expected_n} inputs"
        )
    try:
        probs = np.array([[float(v) for v in row[1:]] for row in body],
                         dtype=np.float64)
    except ValueError:
        raise ProtocolError(f"{cmd}: non-numeric probability value") from None
    if probs.shape[1] != k or not np.isfinite(probs).all():
        raise ProtocolError(f"{cmd}: malformed probability matrix")
    if not np.allclose(probs.sum(axis=1), 1.0, atol=1e-5):
        raise ProtocolError(f"{cmd}: probability rows do not sum to 1")
    return probs


# -- protocol conformance ----------------------------------------------------------


def check_protocol_conformance(command: str, workdir: str | Path) -> None:
    """Golden-file conformance run against an external extractor command.

    Exercises train/extract/predict on a small synthetic set and checks the
    binary magic, header counts, row-stochastic probabilities, and exit-code
    behavior on corrupt input. Raises ProtocolError/ExtractorError on any
    violation.
    """
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240)
    n, side = 24, 8
    labels = rng.integers(0, 2, size=n)
    base = labels[:, None].astype(np.float64)
    raw = (base * 0.6 + rng.normal(0, 0.15, size=(n, side * side))).clip(0, 1)
    ids = [f"s{i}" for i in range(n)]

    spec = ExtractorSpec(kind=EXTERNAL, external_command=command, epochs=2,
                         seed=3)
    model = train_extractor(
        raw, labels, spec,
        ids=ids, class_names=("neg", "pos"), workdir=workdir,
    )

    feats = extract_features(model, raw)      # validates magic + row count
    if feats.shape[1] < 1:
        raise ProtocolError(f"{command}: extract returned zero-width features")
    if not np.isfinite(feats).all():
        raise ProtocolError(f"{command}: extract returned non-finite features")

    result = predict(model, raw)              # validates header + row sums
    if result.probabilities.shape[0] != n:
        raise ProtocolError(f"{command}: predict row count mismatch")

    # corrupt feature file must be rejected with a nonzero exit
    bad = workdir / "corrupt.dfa"
    bad.write_bytes(b"NOPE" + b"\x00" * 16)
    out = workdir / "corrupt_out.dfa"
    proc = subprocess.run(
        list(model.command) + ["extract", "--model", str(model.model_dir),
                               "--features", str(bad), "--out", str(out)],
        capture_output=True, text=True,
    )
    if proc.returncode == 0:
        raise ProtocolError(f"{command}: accepted a corrupt feature file")
