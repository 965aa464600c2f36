"""Datasets, file formats, and stratified S/U/T splitting.

Builds a small synthetic dataset, writes it in both supported formats,
reads it back, and draws three stratified partitions the way the
experiment harness does.
"""

import tempfile
from pathlib import Path

import numpy as np

from deepfa import Dataset, SplitSpec, load_dataset, make_partitions, save_dataset
from deepfa.data import stratified_split, write_split_csv

rng = np.random.default_rng(0)

# 400 samples, three imbalanced classes, 8 features
sizes = {"impurity": 260, "species_a": 90, "species_b": 50}
labels, rows = [], []
for c, (name, count) in enumerate(sizes.items()):
    rows.append(rng.normal(size=(count, 8)) + 3.0 * c)
    labels += [c] * count
dataset = Dataset(
    ids=tuple(f"img{i:04d}" for i in range(400)),
    features=np.vstack(rows),
    labels=np.array(labels),
    class_names=tuple(sizes),
    name="demo400",
)
print(f"dataset: n={dataset.n} d={dataset.d_raw} classes={dataset.class_names}")

workdir = Path(tempfile.mkdtemp(prefix="deepfa-demo-"))

# CSV round-trip (text, value-exact)
save_dataset(dataset, workdir / "demo.csv", "csv")
again = load_dataset(workdir / "demo.csv")
assert again.ids == dataset.ids

# binary round-trip (DFA1 feature file + labels sidecar, bit-exact float32)
save_dataset(dataset, workdir / "demo.dfa", "dfa-binary")
binary = load_dataset(workdir / "demo.dfa", "dfa-binary")
print(f"binary features dtype: {binary.features.dtype}")

# one stratified split: 2% supervised, 30% held-out test
split = stratified_split(dataset, SplitSpec(x=0.02, test_frac=0.30, seed=7))
s, u, t = split.counts
print(f"split x=2%: S={s} U={u} T={t}")
for c, name in enumerate(dataset.class_names):
    in_s = int((dataset.labels[split.indices('S')] == c).sum())
    print(f"  {name}: {in_s} supervised of {sizes[name]}")

# three independent partitions for mean +/- std reporting
parts = make_partitions(dataset, 0.02, 0.30, [7, 8, 9])
print("three partitions, identical counts:",
      all(p.counts == parts[0].counts for p in parts))

write_split_csv(workdir / "split.csv", dataset.ids, split)
print(f"artifacts in {workdir}")
