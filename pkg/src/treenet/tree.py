"""CART-style decision trees with Gini impurity splitting.

Trees are grown greedily. Exhaustive mode scores midpoints of adjacent
distinct feature values; random-threshold mode draws one uniform threshold
per candidate feature. Ties always resolve to the lower feature index, then
the lower threshold, so induction is fully deterministic under a seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from numpy.typing import NDArray

from .data import Dataset
from .errors import EmptyCounts
from .seeding import derive_seed

SPLIT_MODES = ("exhaustive", "random_threshold")


@dataclass
class TreeConfig:
    """Induction hyperparameters for a single tree.

    ``n_candidate_features=None`` means all features. ``max_depth=None``
    means unbounded; 0 forces a single leaf.
    """

    max_depth: int | None = None
    min_samples_leaf: int = 1
    min_samples_split: int = 2
    n_candidate_features: int | None = None
    split_mode: str = "exhaustive"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0 or None")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be positive")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be at least 2")
        if self.n_candidate_features is not None and self.n_candidate_features < 1:
            raise ValueError("n_candidate_features must be positive")
        if self.split_mode not in SPLIT_MODES:
            raise ValueError(f"split_mode must be one of {SPLIT_MODES}")


@dataclass
class Leaf:
    class_counts: NDArray[np.int64]


@dataclass
class Split:
    feature_index: int
    threshold: float
    n_rows: int
    impurity_decrease: float
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None


TreeNode = Union[Leaf, Split]


def gini(counts) -> float:
    """Gini impurity 1 - sum((count_k / total)^2).

    Raises:
        EmptyCounts: counts sum to zero.
    """
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        raise EmptyCounts()
    p = counts / total
    return float(1.0 - (p * p).sum())


def best_split(
    features: NDArray[np.float64],
    labels: NDArray[np.int64],
    n_classes: int,
    rows,
    candidate_features,
    *,
    min_samples_leaf: int = 1,
    split_mode: str = "exhaustive",
    rng: np.random.Generator | None = None,
) -> Optional[tuple[int, float, float]]:
    """Pick the (feature, threshold) with maximal weighted-Gini decrease.

    Candidates are scanned in ascending feature order; within a feature,
    thresholds ascend, and only a strictly larger decrease displaces the
    incumbent, so ties resolve to (lower feature, lower threshold). Returns
    None when no split is valid or the best decrease is <= 0. In
    random_threshold mode one threshold per non-constant candidate feature
    is drawn uniformly from [min, max), in ascending feature order.
    """
    rows = np.asarray(rows, dtype=np.int64)
    feats = np.unique(np.asarray(candidate_features, dtype=np.int64))
    if rows.size < 2 or feats.size == 0:
        return None
    y_node = labels[rows]
    parent_counts = np.bincount(y_node, minlength=n_classes)
    parent_gini = gini(parent_counts)
    sub = features[np.ix_(rows, feats)]
    if split_mode == "exhaustive":
        return _scan_exhaustive(
            sub, y_node, n_classes, feats, parent_counts, parent_gini, min_samples_leaf
        )
    if split_mode == "random_threshold":
        if rng is None:
            raise ValueError("random_threshold mode needs an rng")
        return _scan_random(
            sub, y_node, n_classes, feats, parent_counts, parent_gini,
            min_samples_leaf, rng,
        )
    raise ValueError(f"unknown split_mode {split_mode!r}")


def _pick_best(feats, thresholds, decreases, valid) -> Optional[tuple[int, float, float]]:
    """Ascending-feature scan with strict-improvement tie rule."""
    best = None
    for j in range(feats.size):
        if not valid[j]:
            continue
        dec = float(decreases[j])
        if best is None or dec > best[2]:
            best = (int(feats[j]), float(thresholds[j]), dec)
    if best is None or best[2] <= 0.0:
        return None
    return best


def _scan_exhaustive(
    sub, y_node, n_classes, feats, parent_counts, parent_gini, msl
):
    n, m = sub.shape
    order = np.argsort(sub, axis=0, kind="stable")
    vals = np.take_along_axis(sub, order, axis=0)
    eye = np.eye(n_classes, dtype=np.int64)
    cum = eye[y_node[order]].cumsum(axis=0)  # (n, m, C) prefix class counts
    boundary = vals[1:] != vals[:-1]  # (n-1, m)
    if not boundary.any():
        return None
    thr = (vals[:-1] + vals[1:]) / 2.0
    nl = np.arange(1, n, dtype=np.float64)[:, None]
    nr = float(n) - nl
    lc = cum[:-1]
    rc = parent_counts[None, None, :] - lc
    pl = lc / nl[:, :, None]
    pr = rc / nr[:, :, None]
    gl = 1.0 - (pl * pl).sum(axis=-1)
    gr = 1.0 - (pr * pr).sum(axis=-1)
    dec = parent_gini - (nl / n) * gl - (nr / n) * gr
    valid = boundary & (nl >= msl) & (nr >= msl)

    # A midpoint of two adjacent representable doubles can round up to the
    # higher value; the <= routing then pulls that value's group left, so
    # the prefix-position shortcut is wrong for those cells. Rescore them
    # with exact searchsorted counts.
    collapsed = boundary & (thr == vals[1:])
    for i, j in zip(*np.nonzero(collapsed)):
        pos = int(np.searchsorted(vals[:, j], thr[i, j], side="right"))
        if pos < msl or (n - pos) < msl or pos == 0 or pos == n:
            valid[i, j] = False
            continue
        lcv = cum[pos - 1, j] / pos
        rcv = (parent_counts - cum[pos - 1, j]) / (n - pos)
        g_l = 1.0 - (lcv * lcv).sum()
        g_r = 1.0 - (rcv * rcv).sum()
        dec[i, j] = parent_gini - (pos / n) * g_l - ((n - pos) / n) * g_r

    masked = np.where(valid, dec, -np.inf)
    col_best = masked.max(axis=0)
    col_idx = masked.argmax(axis=0)  # first occurrence = lowest threshold
    return _pick_best(
        feats,
        thr[col_idx, np.arange(m)],
        col_best,
        col_best > -np.inf,
    )


def _scan_random(
    sub, y_node, n_classes, feats, parent_counts, parent_gini, msl, rng
):
    n, m = sub.shape
    lo = sub.min(axis=0)
    hi = sub.max(axis=0)
    varying = np.flatnonzero(hi > lo)
    if varying.size == 0:
        return None
    thresholds = np.empty(varying.size)
    for j, col in enumerate(varying):  # ascending feature order draw
        thresholds[j] = rng.uniform(lo[col], hi[col])
    cols = sub[:, varying]
    left_mask = cols <= thresholds[None, :]
    nl = left_mask.sum(axis=0)
    eye = np.eye(n_classes, dtype=np.int64)
    lc = left_mask.T.astype(np.int64) @ eye[y_node]  # (m', C)
    rc = parent_counts[None, :] - lc
    nr = n - nl
    valid = (nl >= msl) & (nr >= msl)
    if not valid.any():
        return None
    nl_f = nl.astype(np.float64)
    nr_f = nr.astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        pl = lc / nl_f[:, None]
        pr = rc / nr_f[:, None]
        gl = 1.0 - (pl * pl).sum(axis=-1)
        gr = 1.0 - (pr * pr).sum(axis=-1)
    dec = parent_gini - (nl_f / n) * gl - (nr_f / n) * gr
    return _pick_best(feats[varying], thresholds, dec, valid)


def fit_tree(
    dataset: Dataset,
    rows=None,
    config: TreeConfig | None = None,
    rng: np.random.Generator | None = None,
) -> TreeNode:
    """Grow one tree over the given rows of a Dataset."""
    config = config or TreeConfig()
    return fit_tree_arrays(
        dataset.features, dataset.labels, dataset.n_classes, rows, config, rng
    )


def fit_tree_arrays(
    features: NDArray[np.float64],
    labels: NDArray[np.int64],
    n_classes: int,
    rows,
    config: TreeConfig,
    rng: np.random.Generator | None = None,
) -> TreeNode:
    """Array-level tree induction; the forest and cascade layers call this.

    Nodes are produced depth-first, left child before right, which fixes
    the order feature subsets (and random thresholds) are drawn in.
    """
    n_total, d = features.shape
    rows = np.arange(n_total, dtype=np.int64) if rows is None else np.asarray(
        rows, dtype=np.int64
    )
    if rows.size == 0:
        raise ValueError("rows must be nonempty")
    if rng is None:
        rng = np.random.default_rng(derive_seed(config.seed))
    m = d if config.n_candidate_features is None else min(config.n_candidate_features, d)

    root_box: list[TreeNode | None] = [None]
    stack: list[tuple[NDArray, int, Split | None, bool]] = [(rows, 0, None, False)]
    while stack:
        node_rows, depth, parent, is_right = stack.pop()
        counts = np.bincount(labels[node_rows], minlength=n_classes)
        node: TreeNode
        choice = None
        bounded = config.max_depth is not None and depth >= config.max_depth
        if (
            not bounded
            and node_rows.size >= config.min_samples_split
            and counts.max() < node_rows.size
        ):
            cand = rng.choice(d, size=m, replace=False)
            choice = best_split(
                features,
                labels,
                n_classes,
                node_rows,
                cand,
                min_samples_leaf=config.min_samples_leaf,
                split_mode=config.split_mode,
                rng=rng,
            )
        if choice is None:
            node = Leaf(class_counts=counts)
        else:
            feature_index, threshold, decrease = choice
            node = Split(
                feature_index=feature_index,
                threshold=threshold,
                n_rows=int(node_rows.size),
                impurity_decrease=decrease,
            )
            go_left = features[node_rows, feature_index] <= threshold
            stack.append((node_rows[~go_left], depth + 1, node, True))
            stack.append((node_rows[go_left], depth + 1, node, False))
        if parent is None:
            root_box[0] = node
        elif is_right:
            parent.right = node
        else:
            parent.left = node
    assert root_box[0] is not None
    return root_box[0]


def predict_proba_tree(tree: TreeNode, x) -> NDArray[np.float64]:
    """Route one sample to a leaf; return class_counts / total."""
    node = tree
    while isinstance(node, Split):
        node = node.left if x[node.feature_index] <= node.threshold else node.right
    counts = node.class_counts
    total = int(counts.sum())
    if total == 0:
        raise EmptyCounts()
    return counts / total


def tree_feature_importance(
    tree: TreeNode, n_features: int, n_training_rows: int
) -> NDArray[np.float64]:
    """Impurity-decrease importance, weighted by node size, normalized.

    importance_j sums (node_rows / n_training_rows) * impurity_decrease
    over internal nodes splitting feature j; all-zero when the tree never
    split.
    """
    acc = np.zeros(n_features)
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Split):
            acc[node.feature_index] += (
                node.n_rows / n_training_rows
            ) * node.impurity_decrease
            stack.append(node.left)
            stack.append(node.right)
    total = acc.sum()
    if total > 0:
        acc /= total
    return acc


def tree_depth(tree: TreeNode) -> int:
    """Longest root-to-leaf edge count; 0 for a bare leaf."""
    best = 0
    stack = [(tree, 0)]
    while stack:
        node, depth = stack.pop()
        if isinstance(node, Split):
            stack.append((node.left, depth + 1))
            stack.append((node.right, depth + 1))
        else:
            best = max(best, depth)
    return best


class PackedTree:
    """Flat-array mirror of a TreeNode used on the prediction hot paths.

    Leaves carry precomputed probability rows; internal nodes carry child
    indices. Single-sample traversal runs on plain Python lists, batch
    traversal advances every sample one level per vector step.
    """

    __slots__ = (
        "feature", "threshold", "left", "right", "probs",
        "_feat_l", "_thr_l", "_left_l", "_right_l", "_probs_l",
    )

    def __init__(self, root: TreeNode, n_classes: int):
        feat: list[int] = []
        thr: list[float] = []
        left: list[int] = []
        right: list[int] = []
        probs: list[list[float]] = []
        zero = [0.0] * n_classes

        stack: list[tuple[TreeNode, int, bool]] = [(root, -1, False)]
        while stack:
            node, parent, is_right = stack.pop()
            idx = len(feat)
            if parent >= 0:
                if is_right:
                    right[parent] = idx
                else:
                    left[parent] = idx
            if isinstance(node, Split):
                feat.append(node.feature_index)
                thr.append(node.threshold)
                left.append(-1)
                right.append(-1)
                probs.append(zero)
                stack.append((node.right, idx, True))
                stack.append((node.left, idx, False))
            else:
                counts = node.class_counts
                total = int(counts.sum())
                if total == 0:
                    raise EmptyCounts()
                feat.append(-1)
                thr.append(0.0)
                left.append(-1)
                right.append(-1)
                probs.append([float(c) / total for c in counts])

        self._feat_l = feat
        self._thr_l = thr
        self._left_l = left
        self._right_l = right
        self._probs_l = probs
        self.feature = np.asarray(feat, dtype=np.int32)
        self.threshold = np.asarray(thr, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.probs = np.asarray(probs, dtype=np.float64)

    def predict_one(self, x: Sequence[float]) -> list[float]:
        feat = self._feat_l
        thr = self._thr_l
        left = self._left_l
        right = self._right_l
        i = 0
        f = feat[0]
        while f >= 0:
            i = left[i] if x[f] <= thr[i] else right[i]
            f = feat[i]
        return self._probs_l[i]

    def predict_batch(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        n = X.shape[0]
        idx = np.zeros(n, dtype=np.int32)
        while True:
            f = self.feature[idx]
            active = np.flatnonzero(f >= 0)
            if active.size == 0:
                break
            node = idx[active]
            go_left = X[active, f[active]] <= self.threshold[node]
            idx[active] = np.where(go_left, self.left[node], self.right[node])
        return self.probs[idx]
