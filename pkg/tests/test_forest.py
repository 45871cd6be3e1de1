import numpy as np
import pytest

from treenet.data import blob_center, make_blobs
from treenet.errors import DimensionMismatch
from treenet.forest import (
    ForestConfig,
    ForestModel,
    fit_forest,
    forest_feature_importance,
    predict_proba_forest,
    predict_proba_forest_batch,
)
from treenet.tree import Leaf, Split, TreeConfig


def leaf_forest(distributions, n_classes, input_dim=1):
    trees = [Leaf(class_counts=np.array(d, dtype=np.int64)) for d in distributions]
    cfg = ForestConfig(n_trees=len(trees), kind="bagged", seed=0)
    return ForestModel(trees=trees, config=cfg, n_classes=n_classes, input_dim=input_dim)


# ---------------------------------------------------------------- config


def test_config_rejects_zero_trees():
    with pytest.raises(ValueError):
        ForestConfig(n_trees=0)


def test_config_rejects_unknown_kind():
    with pytest.raises(ValueError):
        ForestConfig(kind="boosted")


def test_config_forces_split_mode_to_kind():
    bagged = ForestConfig(kind="bagged", tree=TreeConfig(split_mode="random_threshold"))
    assert bagged.tree.split_mode == "exhaustive"
    extra = ForestConfig(kind="extra", tree=TreeConfig(split_mode="exhaustive"))
    assert extra.tree.split_mode == "random_threshold"


# ---------------------------------------------------------------- fitting


def test_single_tree_forest_deterministic():
    ds = make_blobs(3, 15, 4, spread=1.0, seed=5)
    cfg = ForestConfig(n_trees=1, kind="bagged", seed=77)
    a = fit_forest(ds, config=cfg)
    b = fit_forest(ds, config=cfg)
    probe = ds.features[:10]
    assert np.array_equal(
        predict_proba_forest_batch(a, probe), predict_proba_forest_batch(b, probe)
    )


def test_forest_fits_separable_blobs_perfectly():
    ds = make_blobs(4, 12, 3, spread=1e-9, seed=6)
    for kind in ("bagged", "extra"):
        model = fit_forest(ds, config=ForestConfig(n_trees=10, kind=kind, seed=1))
        proba = predict_proba_forest_batch(model, ds.features)
        assert np.array_equal(proba.argmax(axis=1), ds.labels)
        centers = np.stack([blob_center(k, 3) for k in range(4)])
        dists = np.linalg.norm(ds.features[:, None] - centers[None], axis=2)
        assert np.array_equal(dists.argmin(axis=1), ds.labels)


def test_forest_determinism_across_worker_counts():
    ds = make_blobs(3, 20, 5, spread=1.5, seed=7)
    cfg = ForestConfig(n_trees=8, kind="extra", seed=13)
    seq = fit_forest(ds, config=cfg, n_workers=1)
    par = fit_forest(ds, config=cfg, n_workers=4)
    probe = ds.features
    assert np.array_equal(
        predict_proba_forest_batch(seq, probe), predict_proba_forest_batch(par, probe)
    )


# ---------------------------------------------------------------- predict


def test_predict_two_leaf_trees_average():
    model = leaf_forest([[1, 0], [0, 1]], n_classes=2)
    out = predict_proba_forest(model, [0.0])
    assert out.tolist() == [0.5, 0.5]


def test_predict_single_tree_identity():
    model = leaf_forest([[3, 1]], n_classes=2)
    assert predict_proba_forest(model, [9.9]).tolist() == [0.75, 0.25]


def test_predict_three_tree_hand_average():
    model = leaf_forest([[2, 2], [4, 0], [1, 3]], n_classes=2)
    want = np.array([(0.5 + 1.0 + 0.25) / 3, (0.5 + 0.0 + 0.75) / 3])
    got = predict_proba_forest(model, [0.0])
    assert got == pytest.approx(want, abs=1e-15)


def test_predict_dimension_mismatch():
    ds = make_blobs(2, 10, 3, spread=1.0, seed=8)
    model = fit_forest(ds, config=ForestConfig(n_trees=2, seed=0))
    with pytest.raises(DimensionMismatch):
        predict_proba_forest(model, [1.0, 2.0])
    with pytest.raises(DimensionMismatch):
        predict_proba_forest_batch(model, np.zeros((4, 2)))


def test_forest_outputs_sum_to_one():
    ds = make_blobs(3, 25, 4, spread=2.0, seed=9)
    model = fit_forest(ds, config=ForestConfig(n_trees=12, kind="bagged", seed=3))
    proba = predict_proba_forest_batch(model, ds.features)
    assert proba.min() >= 0
    assert np.abs(proba.sum(axis=1) - 1.0).max() < 1e-12


def test_forest_invariant_under_tree_permutation():
    ds = make_blobs(3, 20, 4, spread=1.5, seed=10)
    model = fit_forest(ds, config=ForestConfig(n_trees=20, kind="bagged", seed=4))
    perm = np.random.default_rng(0).permutation(len(model.trees))
    shuffled = ForestModel(
        trees=[model.trees[i] for i in perm],
        config=model.config,
        n_classes=model.n_classes,
        input_dim=model.input_dim,
    )
    for x in ds.features[:15]:
        a = predict_proba_forest(model, x)
        b = predict_proba_forest(shuffled, x)
        assert np.abs(a - b).max() < 1e-15


def test_batch_matches_single_sample_path():
    ds = make_blobs(3, 15, 3, spread=1.0, seed=11)
    model = fit_forest(ds, config=ForestConfig(n_trees=7, kind="extra", seed=5))
    batch = predict_proba_forest_batch(model, ds.features[:10])
    for i, x in enumerate(ds.features[:10]):
        single = predict_proba_forest(model, x)
        assert np.abs(batch[i] - single).max() < 1e-15


# ---------------------------------------------------------------- importance


def test_importance_all_leaf_forest_zero():
    model = leaf_forest([[2, 2], [3, 1]], n_classes=2, input_dim=3)
    assert forest_feature_importance(model).tolist() == [0.0, 0.0, 0.0]


def test_importance_single_feature_one_hot():
    # force trees onto feature 2 by making it the only informative one
    rng = np.random.default_rng(12)
    X = rng.normal(size=(60, 4))
    X[:, 2] = np.where(np.arange(60) < 30, 0.0, 10.0) + rng.normal(0, 0.01, 60)
    y = (np.arange(60) >= 30).astype(np.int64)
    from treenet.data import Dataset

    ds = Dataset(X, y, ["a", "b"], [f"f{j}" for j in range(4)])
    model = fit_forest(
        ds,
        config=ForestConfig(
            n_trees=10,
            kind="bagged",
            tree=TreeConfig(max_depth=1, n_candidate_features=4),
            seed=2,
        ),
    )
    imp = forest_feature_importance(model)
    assert imp[2] == pytest.approx(1.0, abs=1e-12)


def test_importance_two_tree_hand_mean():
    t1 = Split(
        feature_index=0,
        threshold=0.5,
        n_rows=4,
        impurity_decrease=0.5,
        left=Leaf(np.array([2, 0])),
        right=Leaf(np.array([0, 2])),
    )
    t2 = Split(
        feature_index=1,
        threshold=0.5,
        n_rows=4,
        impurity_decrease=0.5,
        left=Leaf(np.array([2, 0])),
        right=Leaf(np.array([0, 2])),
    )
    cfg = ForestConfig(n_trees=2, seed=0)
    model = ForestModel(trees=[t1, t2], config=cfg, n_classes=2, input_dim=2)
    imp = forest_feature_importance(model)
    # each tree is one-hot on its own feature; mean is (0.5, 0.5)
    assert imp == pytest.approx([0.5, 0.5], abs=1e-15)
    assert imp.sum() == pytest.approx(1.0, abs=1e-12)
