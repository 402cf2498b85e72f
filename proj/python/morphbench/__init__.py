"""Representation-learning benchmark on grayscale cell-image crops."""

from ._core import (  # noqa: F401
    AugmentationPolicy,
    DataError,
    Dataset,
    EmbeddingSet,
    NumericError,
    SyntheticConfig,
    apply_augmentations,
    balance_subset,
    early_stop_check,
    embed,
    generate_synthetic,
    hdbscan_cluster,
    load_dataset,
    load_embeddings,
    make_views,
    normalized_difference,
    pairwise_median_distance,
    partition_metrics,
    roc_auc,
    run_pipeline,
    save_dataset,
    train_setup,
    umap_reduce,
)

__all__ = [name for name in dir() if not name.startswith("_")]
