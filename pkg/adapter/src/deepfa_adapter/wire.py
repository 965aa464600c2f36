"""Engine wire formats: DFA1 feature binaries, labels CSV, probability CSV.

Deliberately self-contained: the adapter talks to the engine only through
these files, never through the engine's Python API.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

MAGIC = b"DFA1"


class WireError(ValueError):
    pass


def read_features(path: str | Path) -> np.ndarray:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 12:
        raise WireError(f"{path}: truncated header")
    if blob[:4] != MAGIC:
        raise WireError(f"{path}: bad magic {blob[:4]!r}")
    n, d = struct.unpack_from("<II", blob, 4)
    if len(blob) != 12 + 4 * n * d:
        raise WireError(f"{path}: expected {12 + 4 * n * d} bytes, got {len(blob)}")
    data = np.frombuffer(blob, dtype="<f4", count=n * d, offset=12)
    return data.reshape(n, d).copy()  # writable, torch-friendly


def write_features(path: str | Path, x: np.ndarray) -> None:
    x = np.ascontiguousarray(x, dtype="<f4")
    if x.ndim != 2:
        raise WireError("feature matrix must be 2-D")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", *x.shape))
        fh.write(x.tobytes(order="C"))


def read_labels(path: str | Path) -> tuple[list[str], list[str], list[bool]]:
    """Labels CSV ``id,label,supervised``; returns ids, names, supervised flags."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows or rows[0][:2] != ["id", "label"]:
        raise WireError(f"{path}: expected header 'id,label,supervised'")
    ids, names, sup = [], [], []
    for row in rows[1:]:
        if len(row) < 2:
            raise WireError(f"{path}: short row {row!r}")
        ids.append(row[0])
        names.append(row[1])
        sup.append(len(row) < 3 or row[2] == "1")
    return ids, names, sup


def write_probabilities(path: str | Path, probs: np.ndarray) -> None:
    """Probability CSV ``id,p0,...,pK-1`` with ids = 0-based row indices."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [f"p{i}" for i in range(probs.shape[1])])
        for i, row in enumerate(probs):
            writer.writerow([i] + [repr(float(v)) for v in row])
