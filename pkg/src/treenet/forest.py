"""Tree ensembles: bagged forests and extremely randomized forests.

The two kinds differ in row sampling and threshold choice only. Bagged
forests bootstrap the training rows and search thresholds exhaustively;
extra forests fit every tree on the full sample with uniformly drawn
thresholds. Each tree's randomness derives from (forest seed, tree index)
alone, so results never depend on scheduling or worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray

from .data import Dataset
from .errors import DimensionMismatch
from .seeding import derive_seed
from .tree import (
    PackedTree,
    Split,
    TreeConfig,
    TreeNode,
    fit_tree_arrays,
    tree_feature_importance,
)

FOREST_KINDS = ("bagged", "extra")

_KIND_MODES = {"bagged": "exhaustive", "extra": "random_threshold"}


@dataclass
class ForestConfig:
    """Ensemble settings; the tree's split_mode is forced to match kind."""

    n_trees: int = 50
    kind: str = "bagged"
    tree: TreeConfig = field(default_factory=TreeConfig)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        if self.kind not in FOREST_KINDS:
            raise ValueError(f"kind must be one of {FOREST_KINDS}")
        wanted = _KIND_MODES[self.kind]
        if self.tree.split_mode != wanted:
            self.tree = replace(self.tree, split_mode=wanted)


@dataclass
class ForestModel:
    """Fitted ensemble; immutable, safe for concurrent prediction."""

    trees: list[TreeNode]
    config: ForestConfig
    n_classes: int
    input_dim: int

    def __post_init__(self) -> None:
        self._packed = [PackedTree(t, self.n_classes) for t in self.trees]

    @property
    def packed(self) -> list[PackedTree]:
        return self._packed


def fit_forest(
    dataset: Dataset,
    rows=None,
    config: ForestConfig | None = None,
    n_workers: int = 1,
) -> ForestModel:
    """Fit an ensemble over the given rows of a Dataset."""
    config = config or ForestConfig()
    return fit_forest_arrays(
        dataset.features,
        dataset.labels,
        dataset.n_classes,
        rows,
        config,
        n_workers=n_workers,
    )


def fit_forest_arrays(
    features: NDArray[np.float64],
    labels: NDArray[np.int64],
    n_classes: int,
    rows,
    config: ForestConfig,
    n_workers: int = 1,
) -> ForestModel:
    """Array-level fit used by the cascade layers.

    Tree t draws its bootstrap rows (bagged only) and all node-level
    randomness from a stream seeded by derive_seed(config.seed, [t]).
    """
    n_total, d = features.shape
    rows = np.arange(n_total, dtype=np.int64) if rows is None else np.asarray(
        rows, dtype=np.int64
    )
    if rows.size == 0:
        raise ValueError("rows must be nonempty")
    tree_cfg = config.tree
    if tree_cfg.n_candidate_features is None:
        tree_cfg = replace(tree_cfg, n_candidate_features=math.ceil(math.sqrt(d)))

    def build(t: int) -> TreeNode:
        rng = np.random.default_rng(derive_seed(config.seed, [t]))
        if config.kind == "bagged":
            train_rows = rows[rng.integers(0, rows.size, rows.size)]
        else:
            train_rows = rows
        return fit_tree_arrays(features, labels, n_classes, train_rows, tree_cfg, rng)

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            trees = list(pool.map(build, range(config.n_trees)))
    else:
        trees = [build(t) for t in range(config.n_trees)]
    return ForestModel(trees=trees, config=config, n_classes=n_classes, input_dim=d)


def predict_proba_forest(model: ForestModel, x) -> NDArray[np.float64]:
    """Unweighted mean of the per-tree probability vectors for one sample."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.input_dim,):
        raise DimensionMismatch(model.input_dim, int(x.size))
    xl = x.tolist()
    stacked = np.array([p.predict_one(xl) for p in model.packed])
    return stacked.mean(axis=0)


def predict_proba_forest_batch(
    model: ForestModel, X: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Row-wise forest probabilities for a whole matrix at once."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise DimensionMismatch(model.input_dim, int(X.shape[-1]))
    acc = np.zeros((X.shape[0], model.n_classes))
    for packed in model.packed:
        acc += packed.predict_batch(X)
    return acc / len(model.packed)


def forest_feature_importance(model: ForestModel) -> NDArray[np.float64]:
    """Mean of per-tree normalized importances, renormalized to sum 1.

    All-zero when no tree in the forest ever split.
    """
    acc = np.zeros(model.input_dim)
    for tree in model.trees:
        root_rows = tree.n_rows if isinstance(tree, Split) else 1
        acc += tree_feature_importance(tree, model.input_dim, root_rows)
    total = acc.sum()
    if total > 0:
        acc /= total
    return acc
