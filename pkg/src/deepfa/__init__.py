"""Semi-supervised annotation engine.

Grows a small supervised sample set into a large pseudo-labeled training
set by looping: feature extraction -> 2D projection -> bottleneck-path
label propagation -> extractor retraining.
"""

from .data import (
    Dataset,
    SplitAssignment,
    SplitSpec,
    load_dataset,
    make_partitions,
    read_feature_matrix,
    save_dataset,
    stratified_split,
    write_feature_matrix,
)
from .driver import (
    BASELINE,
    DEEPFA,
    DEEPFA_LOOP,
    ExperimentConfig,
    RunResult,
    run_baseline,
    run_deepfa,
    run_experiment,
    run_grid,
)
from .extractor import (
    ExtractorSpec,
    PredictionResult,
    extract_features,
    predict,
    train_extractor,
)
from .metrics import (
    AggregateRecord,
    MetricRecord,
    accuracy,
    aggregate,
    cohens_kappa,
    propagation_accuracy,
)
from .opf import (
    ConfidenceVector,
    PathForest,
    SeedSet,
    confidence,
    minimax_oracle,
    per_class_costs,
    propagate_labels,
)
from .plots import PlotSpec, confidence_color, render_scatter
from .tsne import (
    TsneParams,
    calibrate_perplexity,
    kl_divergence,
    kl_gradient,
    pairwise_sq_distances,
    symmetrize,
    tsne_embed,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
