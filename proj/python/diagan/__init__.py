"""Self-diagnosing GAN toolkit: LDR statistics, score-based resampling and DRS."""

from ._diagan import (
    ConfigError,
    DiaganError,
    Group,
    compute_scores,
    f_hat,
    frechet_distance,
    gen_25_gaussians,
    gen_single_gaussian,
    high_quality_counts,
    knn_thresholds,
    ldr,
    load_config,
    partial_recall,
    precision,
    recall,
    run,
)

__all__ = [
    "ConfigError",
    "DiaganError",
    "Group",
    "compute_scores",
    "f_hat",
    "frechet_distance",
    "gen_25_gaussians",
    "gen_single_gaussian",
    "high_quality_counts",
    "knn_thresholds",
    "ldr",
    "load_config",
    "partial_recall",
    "precision",
    "recall",
    "run",
]
