"""The full annotation loop: baseline vs one propagation round vs looping.

Runs the three experiment modes on synthetic blobs with only 2% of labels
supervised, three partitions each, then prints the per-iteration table
that the `report` command would tabulate from disk.
"""

import numpy as np

from deepfa import ExperimentConfig, run_baseline, run_deepfa
from deepfa.data import Dataset, SplitSpec
from deepfa.driver import BASELINE, DEEPFA, DEEPFA_LOOP
from deepfa.extractor import ExtractorSpec
from deepfa.tsne import TsneParams

rng = np.random.default_rng(3)
centers = np.zeros((3, 10))
centers[1, 0] = 9.0
centers[2, 1] = 9.0
features = np.vstack([rng.normal(size=(120, 10)) + c for c in centers])
dataset = Dataset(
    ids=tuple(f"s{i:04d}" for i in range(360)),
    features=features,
    labels=np.repeat([0, 1, 2], 120),
    class_names=("alpha", "beta", "gamma"),
    name="loop-demo",
)


def config(mode, iterations=None):
    return ExperimentConfig(
        mode=mode,
        iterations=iterations,
        split=SplitSpec(x=0.02, test_frac=0.30, seed=11),
        tsne=TsneParams(iterations=600, perplexity=20.0),
        extractor=ExtractorSpec(epochs=60, hidden_width=64, lr_initial=0.05),
        base_seed=11,
        partitions=3,
    )


print("supervised budget: 2% of 360 samples = 7 seeds across 3 classes\n")

results = {
    BASELINE: run_baseline(dataset, config(BASELINE)),
    DEEPFA: run_deepfa(dataset, config(DEEPFA)),
    DEEPFA_LOOP: run_deepfa(dataset, config(DEEPFA_LOOP, iterations=3)),
}

print(f"{'mode':<14}{'iter':<6}{'accuracy':<22}{'kappa':<22}{'propagation'}")
for mode, result in results.items():
    for t, agg in result.aggregates().items():
        prop = ("-" if agg.propagation_mean is None
                else f"{agg.propagation_mean:.4f} +/- {agg.propagation_std:.4f}")
        print(f"{mode:<14}{t:<6}"
              f"{agg.accuracy_mean:.4f} +/- {agg.accuracy_std:.4f}    "
              f"{agg.kappa_mean:.4f} +/- {agg.kappa_std:.4f}    {prop}")
    print()

final = {mode: r.aggregates()[r.final_iteration].kappa_mean
         for mode, r in results.items()}
print("final kappa by mode:", {m: round(v, 4) for m, v in final.items()})
