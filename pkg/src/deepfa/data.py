"""Dataset representation, stratified S/U/T splitting, and on-disk formats.

Formats owned here and shared by every other module:

* dataset CSV: header ``id,label,f0,f1,...``, UTF-8, decimal-point reals;
* feature binary (``.dfa``): magic ``DFA1``, uint32-LE n, uint32-LE d,
  then n*d little-endian float32 values, row-major;
* labels sidecar CSV: ``id,label,supervised`` with supervised in {0,1};
* split assignment CSV: ``id,split`` with split in {S,U,T}.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionError,
    ParseError,
    SpecError,
    StratificationError,
)

FEATURE_MAGIC = b"DFA1"

SUPERVISED = "S"
UNSUPERVISED = "U"
TEST = "T"
_TAGS = (SUPERVISED, UNSUPERVISED, TEST)


@dataclass(frozen=True)
class Dataset:
    """An ordered sample collection with hidden ground-truth labels.

    ``labels`` holds class indices into ``class_names``; during training the
    engine only ever exposes them for S members, but they stay available here
    so evaluation can score propagation and test predictions.
    """

    ids: tuple[str, ...]
    features: np.ndarray          # (n, d_raw)
    labels: np.ndarray            # (n,) int indices into class_names
    class_names: tuple[str, ...]
    name: str = "dataset"

    def __post_init__(self) -> None:
        feats = np.asarray(self.features)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise DimensionError("features must be a non-empty (n, d) matrix")
        n = feats.shape[0]
        if len(self.ids) != n or labels.shape != (n,):
            raise DimensionError("ids, features, and labels must agree on n")
        if len(set(self.ids)) != n:
            raise ParseError("sample ids must be unique")
        if not np.isfinite(feats).all():
            raise ParseError("features contain non-finite values")
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.class_names)):
            raise ParseError("labels must index into class_names")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d_raw(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def label_names(self, indices: np.ndarray) -> list[str]:
        return [self.class_names[int(i)] for i in indices]


@dataclass(frozen=True)
class SplitSpec:
    """Fractions and seed controlling one stratified S/U/T split.

    ``x`` is the supervised fraction (1%-5% in the reference experiments),
    ``test_frac`` the held-out test fraction (30% by default).
    """

    x: float
    test_frac: float = 0.30
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.x <= 1.0):
            raise SpecError(f"supervised fraction x={self.x} must satisfy 0 < x <= 1")
        if not (0.0 <= self.test_frac < 1.0):
            raise SpecError(
                f"test_frac={self.test_frac} must satisfy 0 <= test_frac < 1"
            )
        if self.x + self.test_frac >= 1.0:
            raise SpecError(
                f"x + test_frac = {self.x + self.test_frac} must be < 1 "
                "(the unsupervised pool would be empty)"
            )


@dataclass(frozen=True)
class SplitAssignment:
    """Per-sample membership in S (supervised), U (unsupervised), or T (test)."""

    membership: np.ndarray        # (n,) of 'S' / 'U' / 'T'

    def __post_init__(self) -> None:
        member = np.asarray(self.membership, dtype="<U1")
        object.__setattr__(self, "membership", member)
        if not np.isin(member, _TAGS).all():
            raise SpecError("membership tags must be one of S, U, T")

    @property
    def counts(self) -> tuple[int, int, int]:
        m = self.membership
        return (
            int((m == SUPERVISED).sum()),
            int((m == UNSUPERVISED).sum()),
            int((m == TEST).sum()),
        )

    def indices(self, tag: str) -> np.ndarray:
        return np.flatnonzero(self.membership == tag)


# -- stratified splitting ------------------------------------------------------


def _largest_remainder(total: int, weights: np.ndarray, caps: np.ndarray) -> np.ndarray:
    """Integer quotas proportional to ``weights`` summing to ``total``.

    Largest-remainder apportionment with per-class capacity caps; the
    leftover units go one at a time to the most under-allocated class with
    spare capacity (ties break by class index), so results are deterministic.
    """
    weights = np.asarray(weights, dtype=np.float64)
    caps = np.asarray(caps, dtype=np.int64)
    if caps.sum() < total:
        raise StratificationError(
            f"cannot allocate {total} samples: only {int(caps.sum())} available"
        )
    ideal = total * weights / weights.sum()
    quotas = np.minimum(np.floor(ideal).astype(np.int64), caps)
    while int(quotas.sum()) < total:
        deficit = np.where(quotas < caps, ideal - quotas, -np.inf)
        quotas[int(np.argmax(deficit))] += 1
    return quotas


def stratified_split(dataset: Dataset, spec: SplitSpec) -> SplitAssignment:
    """Split a dataset into S/U/T, stratified by class, deterministic in seed.

    |S| = floor(x*n) with per-class quotas by largest remainder; any class
    whose quota rounds to zero still contributes one supervised sample (the
    slot comes out of its unsupervised allocation, so |S| can exceed
    floor(x*n) by at most K-1). |T| = ceil(test_frac*n), also stratified.
    """
    n = dataset.n
    k = dataset.n_classes
    class_counts = np.bincount(dataset.labels, minlength=k)
    if (class_counts == 0).any():
        empty = dataset.class_names[int(np.argmin(class_counts))]
        raise StratificationError(f"class {empty!r} has no samples")

    s_total = math.floor(spec.x * n)
    if s_total < k:
        raise SpecError(
            f"floor(x*n) = {s_total} supervised slots cannot cover {k} classes"
        )
    t_total = math.ceil(spec.test_frac * n)
    if s_total + t_total > n:
        raise SpecError("split fractions leave a negative unsupervised pool")

    s_quotas = _largest_remainder(s_total, class_counts, class_counts)
    zero = s_quotas == 0
    s_quotas[zero] = 1  # every class needs at least one propagation seed
    t_quotas = _largest_remainder(t_total, class_counts, class_counts - s_quotas)

    rng = np.random.default_rng(spec.seed)
    membership = np.empty(n, dtype="<U1")
    membership[:] = UNSUPERVISED
    for c in range(k):
        members = np.flatnonzero(dataset.labels == c)
        rng.shuffle(members)
        sq, tq = int(s_quotas[c]), int(t_quotas[c])
        membership[members[:sq]] = SUPERVISED
        membership[members[sq:sq + tq]] = TEST
    return SplitAssignment(membership)


def make_partitions(
    dataset: Dataset,
    x: float,
    test_frac: float,
    seeds: list[int],
) -> list[SplitAssignment]:
    """Independent stratified splits, one per seed (typically three)."""
    if len(set(seeds)) != len(seeds):
        raise SpecError(f"partition seeds must be distinct, got {seeds}")
    return [
        stratified_split(dataset, SplitSpec(x=x, test_frac=test_frac, seed=s))
        for s in seeds
    ]


# -- dataset CSV ----------------------------------------------------------------


def _parse_float(token: str, line_no: int, path: Path) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"{path}: line {line_no}: {token!r} is not a number") from None
    if not math.isfinite(value):
        raise ParseError(f"{path}: line {line_no}: non-finite feature value {token!r}")
    return value


def load_dataset(
    path: str | Path,
    format: str = "csv",
    labels_path: str | Path | None = None,
    name: str | None = None,
) -> Dataset:
    """Load a dataset from ``csv`` or ``dfa-binary`` format.

    The binary format carries features only, so ids and labels come from the
    labels sidecar (``<stem>.labels.csv`` next to the file unless
    ``labels_path`` overrides it).
    """
    path = Path(path)
    name = name if name is not None else path.stem
    if format == "csv":
        return _load_csv_dataset(path, name)
    if format == "dfa-binary":
        features = read_feature_matrix(path)
        sidecar = Path(labels_path) if labels_path else path.with_suffix(".labels.csv")
        ids, label_names, _ = read_labels_csv(sidecar)
        if len(ids) != features.shape[0]:
            raise DimensionError(
                f"{sidecar}: {len(ids)} labeled ids for {features.shape[0]} feature rows"
            )
        class_names = tuple(sorted(set(label_names)))
        index = {c: i for i, c in enumerate(class_names)}
        labels = np.array([index[l] for l in label_names], dtype=np.int64)
        return Dataset(tuple(ids), features, labels, class_names, name=name)
    raise SpecError(f"unknown dataset format {format!r}")


def _load_csv_dataset(path: Path, name: str) -> Dataset:
    if not path.exists():
        raise ParseError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 3 or header[0] != "id" or header[1] != "label":
        raise ParseError(
            f"{path}: line 1: header must be 'id,label,f0,...', got {','.join(header)!r}"
        )
    d_raw = len(header) - 2
    ids: list[str] = []
    label_names: list[str] = []
    features: list[list[float]] = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) - 2 != d_raw:
            raise DimensionError(
                f"{path}: dimension error at row {line_no}: "
                f"expected {d_raw} features, found {len(row) - 2}"
            )
        ids.append(row[0])
        label_names.append(row[1])
        features.append([_parse_float(tok, line_no, path) for tok in row[2:]])
    if not ids:
        raise ParseError(f"{path}: no data rows")
    if len(set(ids)) != len(ids):
        raise ParseError(f"{path}: duplicate sample ids")
    class_names = tuple(sorted(set(label_names)))
    index = {c: i for i, c in enumerate(class_names)}
    labels = np.array([index[l] for l in label_names], dtype=np.int64)
    return Dataset(tuple(ids), np.array(features, dtype=np.float64), labels,
                   class_names, name=name)


def save_dataset(dataset: Dataset, path: str | Path, format: str = "csv") -> None:
    """Write a dataset in ``csv`` or ``dfa-binary`` (+ labels sidecar) format."""
    path = Path(path)
    if format == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "label"] + [f"f{i}" for i in range(dataset.d_raw)])
            for i, sid in enumerate(dataset.ids):
                row = [sid, dataset.class_names[int(dataset.labels[i])]]
                row += [repr(float(v)) for v in dataset.features[i]]
                writer.writerow(row)
        return
    if format == "dfa-binary":
        write_feature_matrix(path, dataset.features)
        write_labels_csv(
            path.with_suffix(".labels.csv"),
            dataset.ids,
            dataset.label_names(dataset.labels),
            np.ones(dataset.n, dtype=bool),
        )
        return
    raise SpecError(f"unknown dataset format {format!r}")


# -- feature binary (.dfa) -------------------------------------------------------


def write_feature_matrix(path: str | Path, features: np.ndarray) -> None:
    """Write an (n, d) matrix as magic + uint32 n + uint32 d + float32 LE data."""
    feats = np.ascontiguousarray(features, dtype="<f4")
    if feats.ndim != 2:
        raise DimensionError("feature matrix must be 2-D")
    n, d = feats.shape
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<II", n, d))
        fh.write(feats.tobytes(order="C"))


def read_feature_matrix(path: str | Path) -> np.ndarray:
    """Read a feature binary; raises ParseError naming the bad offset."""
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path}: no such file")
    blob = path.read_bytes()
    if len(blob) < 12:
        raise ParseError(f"{path}: truncated header ({len(blob)} bytes, need 12)")
    if blob[:4] != FEATURE_MAGIC:
        raise ParseError(f"{path}: bad magic {blob[:4]!r} at offset 0")
    n, d = struct.unpack_from("<II", blob, 4)
    expected = 12 + 4 * n * d
    if len(blob) != expected:
        raise ParseError(
            f"{path}: expected {expected} bytes for n={n} d={d}, found {len(blob)}"
        )
    data = np.frombuffer(blob, dtype="<f4", count=n * d, offset=12)
    return data.reshape(n, d).copy()


# -- labels sidecar ---------------------------------------------------------------


def write_labels_csv(
    path: str | Path,
    ids,
    label_names,
    supervised,
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label", "supervised"])
        for sid, label, sup in zip(ids, label_names, supervised):
            writer.writerow([sid, label, int(sup)])


def read_labels_csv(path: str | Path) -> tuple[list[str], list[str], np.ndarray]:
    """Read a labels sidecar; returns (ids, label names, supervised mask)."""
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["id", "label"]:
        raise ParseError(f"{path}: line 1: expected header 'id,label,supervised'")
    has_sup = len(rows[0]) > 2 and rows[0][2] == "supervised"
    ids: list[str] = []
    labels: list[str] = []
    supervised: list[bool] = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) < 2:
            raise ParseError(f"{path}: line {line_no}: expected id,label[,supervised]")
        ids.append(row[0])
        labels.append(row[1])
        if has_sup and len(row) > 2:
            if row[2] not in ("0", "1"):
                raise ParseError(
                    f"{path}: line {line_no}: supervised must be 0 or 1, got {row[2]!r}"
                )
            supervised.append(row[2] == "1")
        else:
            supervised.append(True)
    return ids, labels, np.array(supervised, dtype=bool)


# -- split assignment CSV ----------------------------------------------------------


def write_split_csv(path: str | Path, ids, assignment: SplitAssignment) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "split"])
        for sid, tag in zip(ids, assignment.membership):
            writer.writerow([sid, tag])


def read_split_csv(path: str | Path, ids) -> SplitAssignment:
    """Read a split CSV and align it to the dataset's id order."""
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["id", "split"]:
        raise ParseError(f"{path}: line 1: expected header 'id,split'")
    by_id: dict[str, str] = {}
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2 or row[1] not in _TAGS:
            raise ParseError(f"{path}: line {line_no}: expected 'id,{{S|U|T}}'")
        by_id[row[0]] = row[1]
    try:
        membership = np.array([by_id[sid] for sid in ids], dtype="<U1")
    except KeyError as missing:
        raise ParseError(f"{path}: no split entry for sample id {missing}") from None
    return SplitAssignment(membership)
