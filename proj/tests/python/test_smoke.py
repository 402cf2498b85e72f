"""Smoke tests for the python bindings (run via ctest with PYTHONPATH set)."""
import math
import sys
import tempfile
from pathlib import Path

import numpy as np

import morphbench as mb


def test_synthetic_roundtrip():
    cfg = mb.SyntheticConfig()
    cfg.n_cell_lines = 1
    cfg.n_drugs = 2
    cfg.images_per_condition = 4
    cfg.seed = 11
    ds = mb.generate_synthetic(cfg)
    assert len(ds) == 1 * (2 * 5 + 4) * 4
    imgs = ds.images()
    assert imgs.shape == (len(ds), 64, 64)
    assert imgs.min() >= 0.0 and imgs.max() <= 1.0

    with tempfile.TemporaryDirectory() as tmp:
        mb.save_dataset(ds, Path(tmp) / "ds")
        back = mb.load_dataset(Path(tmp) / "ds")
        assert np.array_equal(back.images(), imgs)
        assert back.meta()[0]["sample_id"] == ds.meta()[0]["sample_id"]


def test_balance_is_even():
    cfg = mb.SyntheticConfig()
    cfg.n_cell_lines = 1
    cfg.n_drugs = 2
    cfg.images_per_condition = 6
    ds = mb.generate_synthetic(cfg)
    balanced = mb.balance_subset(ds, 3)
    labels = [m["label"] for m in balanced.meta()]
    assert labels.count("drug") == labels.count("control")


def test_views_and_augment():
    img = np.random.default_rng(0).random((64, 64), dtype=np.float32)
    views = mb.make_views(img, "multi_crop", None, seed=5)
    assert len(views) == 5
    for v in views:
        assert v.shape == (64, 64)
        assert v.min() >= 0.0 and v.max() <= 1.0
    one = mb.make_views(img, "one_crop", None, seed=5)
    assert len(one) == 1
    assert np.array_equal(one[0], img)

    policy = mb.AugmentationPolicy()
    a = mb.apply_augmentations(img, policy, seed=9)
    b = mb.apply_augmentations(img, policy, seed=9)
    assert np.array_equal(a, b)


def test_distance_and_auc_hand_values():
    a = np.zeros((1, 2), dtype=np.float32)
    b = np.array([[3.0, 4.0]], dtype=np.float32)
    assert mb.pairwise_median_distance(a, b) == 5.0
    assert mb.normalized_difference(2, 4, 4) == 0.5
    assert mb.roc_auc([0.9, 0.4, 0.6, 0.1], [1, 1, 0, 0]) == 0.75
    assert math.isclose(mb.early_stop_check([1.0, 0.5, 0.6, 0.6, 0.6]), True)
    assert not mb.early_stop_check([1.0, 0.9, 0.8])


def test_cluster_pipeline():
    rng = np.random.default_rng(3)
    blob_a = rng.normal(0, 1, size=(60, 16))
    blob_b = rng.normal(0, 1, size=(60, 16)) + 40.0
    x = np.vstack([blob_a, blob_b]).astype(np.float32)
    reduced = mb.umap_reduce(x, n_neighbors=10, seed=4)
    assert reduced.shape == (120, 2)
    labels = mb.hdbscan_cluster(reduced, min_cluster_size=10)
    assert len(set(l for l in labels if l >= 0)) == 2
    metrics = mb.partition_metrics(reduced, labels)
    assert metrics["n_clusters"] == 2
    assert metrics["silhouette"] is not None and metrics["silhouette"] > 0.5


def test_train_and_embed_smoke():
    cfg = mb.SyntheticConfig()
    cfg.n_cell_lines = 1
    cfg.n_drugs = 2
    cfg.images_per_condition = 10
    cfg.seed = 5
    balanced = mb.balance_subset(mb.generate_synthetic(cfg), 5)
    with tempfile.TemporaryDirectory() as tmp:
        record = mb.train_setup("SSL,aug,one_crop", balanced, val_fraction=0.2, seed=7,
                                epochs=1, batch_size=16, learning_rate=1e-3,
                                out_dir=Path(tmp) / "run")
        assert not record["failed"]
        assert record["epochs_completed"] == 1
        emb = mb.embed(record["checkpoint_path"], balanced)
        assert emb.matrix().shape == (len(balanced), emb.latent_dim)


def main():
    failures = 0
    for name, fn in sorted(globals().items()):
        if not name.startswith("test_"):
            continue
        try:
            fn()
            print(f"ok   {name}")
        except Exception as exc:  # noqa: BLE001
            failures += 1
            print(f"FAIL {name}: {exc!r}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
