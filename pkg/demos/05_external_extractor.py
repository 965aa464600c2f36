"""Driving an external extractor process over the wire protocol.

Any executable honoring the three verbs can replace the builtin network:

    <cmd> train   --features in.dfa --labels l.csv --model dir
                  --epochs N --lr R --momentum M --seed S
    <cmd> extract --model dir --features in.dfa --out out.dfa
    <cmd> predict --model dir --features in.dfa --out probs.csv

This demo checks conformance of whatever command you point it at
(default: the CNN adapter from the sibling `adapter/` package, if
installed) and then trains through it.
"""

import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from deepfa.extractor import (
    ExtractorSpec,
    check_protocol_conformance,
    extract_features,
    predict,
    train_extractor,
)

command = sys.argv[1] if len(sys.argv) > 1 else "deepfa-adapter"
if shutil.which(command.split()[0]) is None:
    print(f"extractor command {command!r} not found; "
          "install the adapter package or pass a command")
    raise SystemExit(0)

workdir = Path(tempfile.mkdtemp(prefix="deepfa-demo-"))
print(f"running the engine's conformance suite against {command!r} ...")
check_protocol_conformance(command, workdir / "conformance")
print("conformance: ok (magic, headers, row-stochastic probabilities, exit codes)")

# small 10x10 grayscale problem, flattened the way the engine ships features
rng = np.random.default_rng(5)
labels = rng.integers(0, 2, 80)
images = rng.uniform(0, 0.25, (80, 10, 10)).astype(np.float32)
for i, lab in enumerate(labels):
    if lab:
        images[i, 5:, 5:] += 0.7
    else:
        images[i, :5, :5] += 0.7
flat = images.reshape(80, -1)

spec = ExtractorSpec(kind="external", external_command=command,
                     epochs=15, lr_initial=0.05, seed=3)
model = train_extractor(
    flat, labels, spec,
    ids=[f"img{i:03d}" for i in range(80)],
    class_names=("quadrant_a", "quadrant_b"),
    workdir=workdir / "model",
)
feats = extract_features(model, flat)
result = predict(model, flat)
print(f"extracted features: {feats.shape[1]} dims per sample")
print(f"training-set accuracy through the protocol: "
      f"{(result.predicted_label == labels).mean():.3f}")
print(f"artifacts under {workdir}")
