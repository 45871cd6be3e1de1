"""Layered forest cascade with out-of-fold augmentation.

Each layer holds K forests (alternating bagged and extra). A layer's
training-time outputs are out-of-fold probabilities: every row is scored by
fold models that never saw it, and those vectors, concatenated after the
original features, form the next layer's input. Growth stops when the
validation metric stalls; the stored model is truncated at the best layer.

Seed discipline: every random stream is derive_seed(seed, [layer, forest,
fold]). The fold assignment uses the sentinel path [layer, K, k_folds] and
each forest's full-data refit uses [layer, forest, k_folds].
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .data import Dataset
from .errors import (
    DegenerateTraining,
    DimensionMismatch,
    KFoldsTooLarge,
    OutputUnwritable,
    SchemaViolation,
    UnsupportedVersion,
)
from .forest import (
    ForestConfig,
    ForestModel,
    fit_forest_arrays,
    predict_proba_forest_batch,
)
from .metrics import evaluate_predictions
from .seeding import derive_seed
from .tree import Leaf, Split, TreeConfig, TreeNode

GROWTH_METRICS = ("weighted_f1", "accuracy")

FORMAT_VERSION = 1


@dataclass
class CascadeConfig:
    """Growth and ensemble settings for the whole cascade.

    forests_per_layer alternate kinds: even indices bagged, odd extra, so
    the default 4 gives 2 + 2. max_depth and min_samples_leaf pass through
    to every tree.
    """

    forests_per_layer: int = 4
    trees_per_forest: int = 50
    k_folds: int = 3
    max_layers: int = 20
    patience: int = 2
    improvement_tolerance: float = 1e-4
    growth_metric: str = "weighted_f1"
    seed: int = 0
    max_depth: int | None = None
    min_samples_leaf: int = 1

    def __post_init__(self) -> None:
        if self.forests_per_layer < 1:
            raise ValueError("forests_per_layer must be at least 1")
        if self.trees_per_forest < 1:
            raise ValueError("trees_per_forest must be at least 1")
        if self.k_folds < 2:
            raise ValueError("k_folds must be at least 2")
        if self.max_layers < 1:
            raise ValueError("max_layers must be at least 1")
        if self.patience < 0:
            raise ValueError("patience must be nonnegative")
        if self.improvement_tolerance < 0:
            raise ValueError("improvement_tolerance must be nonnegative")
        if self.growth_metric not in GROWTH_METRICS:
            raise ValueError(f"growth_metric must be one of {GROWTH_METRICS}")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0 or None")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be positive")

    def as_dict(self) -> dict:
        return {
            "forests_per_layer": self.forests_per_layer,
            "trees_per_forest": self.trees_per_forest,
            "k_folds": self.k_folds,
            "max_layers": self.max_layers,
            "patience": self.patience,
            "improvement_tolerance": self.improvement_tolerance,
            "growth_metric": self.growth_metric,
            "seed": self.seed,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
        }


def cascade_config_from_dict(raw: dict, path: str = "config") -> CascadeConfig:
    """Build a CascadeConfig from a mapping, rejecting unknown keys."""
    if not isinstance(raw, dict):
        raise SchemaViolation(path, "expected an object")
    known = set(CascadeConfig().as_dict())
    for key in raw:
        if key not in known:
            raise SchemaViolation(f"{path}.{key}", f"unknown config key {key!r}")
    try:
        return CascadeConfig(**raw)
    except (TypeError, ValueError) as e:
        raise SchemaViolation(path, str(e)) from None


@dataclass
class LayerModel:
    """One stored layer: its K refit forests plus bookkeeping."""

    forests: list[ForestModel]
    layer_index: int
    validation_metric: float
    train_seconds: float | None = None


@dataclass
class CascadeModel:
    layers: list[LayerModel]
    n_classes: int
    input_dim: int
    config: CascadeConfig
    history: list[float] = field(default_factory=list)
    class_names: list[str] | None = None


def augment(x, layer_probs) -> NDArray[np.float64]:
    """Concatenate [x; p_1; ...; p_K], the raw features always first.

    Raises:
        DimensionMismatch: probability vectors disagree in length.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch(1, x.ndim, "augment input")
    probs = [np.asarray(p, dtype=np.float64) for p in layer_probs]
    if not probs:
        return x.copy()
    width = probs[0].size
    for p in probs:
        if p.ndim != 1 or p.size != width:
            raise DimensionMismatch(width, int(p.size), "probability vector")
        if abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValueError("probability vector must sum to 1")
    return np.concatenate([x] + probs)


def stratified_fold_assignment(
    labels: NDArray[np.int64], k_folds: int, seed: int
) -> NDArray[np.int64]:
    """Deal each class's shuffled rows round-robin over k folds."""
    labels = np.asarray(labels, dtype=np.int64)
    fold = np.empty(labels.size, dtype=np.int64)
    rng = np.random.default_rng(seed)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        perm = rng.permutation(idx)
        fold[perm] = np.arange(perm.size) % k_folds
    return fold


def _forest_kind(forest_index: int) -> str:
    return "bagged" if forest_index % 2 == 0 else "extra"


def _layer_tree_config(config: CascadeConfig) -> TreeConfig:
    return TreeConfig(
        max_depth=config.max_depth,
        min_samples_leaf=config.min_samples_leaf,
        split_mode="exhaustive",  # replaced per forest kind
    )


def fit_cascade(
    train: Dataset,
    config: CascadeConfig | None = None,
    n_workers: int = 1,
    oof_trace: list | None = None,
) -> CascadeModel:
    """Grow a cascade on a training Dataset.

    ``oof_trace``, when given a list, receives one record per candidate
    layer with the fold assignment and the exact row sets each fold model
    trained on and predicted, for leakage auditing.

    Raises:
        KFoldsTooLarge: k_folds exceeds the smallest class count.
        DegenerateTraining: fewer than two classes present in the rows.
    """
    config = config or CascadeConfig()
    X = train.features
    y = train.labels
    n, d = X.shape
    C = train.n_classes
    K = config.forests_per_layer
    k = config.k_folds

    present = np.bincount(y, minlength=C)
    present_counts = present[present > 0]
    if present_counts.size < 2:
        raise DegenerateTraining()
    smallest = int(present_counts.min())
    if k > smallest:
        raise KFoldsTooLarge(k, smallest)

    tree_cfg = _layer_tree_config(config)
    layers: list[LayerModel] = []
    history: list[float] = []
    best_metric = -math.inf
    bad = 0
    representation = X

    for layer_index in range(config.max_layers):
        t0 = time.perf_counter()
        fold_of_row = stratified_fold_assignment(
            y, k, derive_seed(config.seed, [layer_index, K, k])
        )

        def job_rows(forest_index: int, fold_index: int) -> NDArray[np.int64]:
            if fold_index == k:  # the stored refit sees every row
                return np.arange(n, dtype=np.int64)
            return np.flatnonzero(fold_of_row != fold_index)

        def fit_job(job: tuple[int, int]) -> ForestModel:
            forest_index, fold_index = job
            cfg = ForestConfig(
                n_trees=config.trees_per_forest,
                kind=_forest_kind(forest_index),
                tree=tree_cfg,
                seed=derive_seed(config.seed, [layer_index, forest_index, fold_index]),
            )
            return fit_forest_arrays(
                representation, y, C, job_rows(forest_index, fold_index), cfg
            )

        jobs = [(f, j) for f in range(K) for j in range(k + 1)]
        if n_workers > 1:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                fitted = dict(zip(jobs, pool.map(fit_job, jobs)))
        else:
            fitted = {job: fit_job(job) for job in jobs}

        oof = np.zeros((K, n, C))
        trace_record = {
            "layer_index": layer_index,
            "fold_of_row": fold_of_row.copy(),
            "fold_train_rows": {},
            "fold_predicted_rows": {},
        }
        for f in range(K):
            for j in range(k):
                heldout = np.flatnonzero(fold_of_row == j)
                oof[f, heldout] = predict_proba_forest_batch(
                    fitted[(f, j)], representation[heldout]
                )
                trace_record["fold_train_rows"][(f, j)] = job_rows(f, j)
                trace_record["fold_predicted_rows"][(f, j)] = heldout
        if oof_trace is not None:
            oof_trace.append(trace_record)

        mean_oof = oof.mean(axis=0)
        y_oof = mean_oof.argmax(axis=1)
        report = evaluate_predictions(y, y_oof, C)
        metric = (
            report.f1.weighted
            if config.growth_metric == "weighted_f1"
            else report.accuracy
        )
        history.append(metric)
        layers.append(
            LayerModel(
                forests=[fitted[(f, k)] for f in range(K)],
                layer_index=layer_index,
                validation_metric=metric,
                train_seconds=time.perf_counter() - t0,
            )
        )

        if metric > best_metric + config.improvement_tolerance:
            best_metric = metric
            bad = 0
        else:
            bad += 1
            if bad >= config.patience:
                break
        if layer_index + 1 < config.max_layers:
            flat = oof.transpose(1, 0, 2).reshape(n, K * C)
            representation = np.hstack([X, flat])

    best_index = int(np.argmax(history))  # ties resolve to the earliest layer
    return CascadeModel(
        layers=layers[: best_index + 1],
        n_classes=C,
        input_dim=d,
        config=config,
        history=history,
        class_names=list(train.class_names),
    )


def predict_proba_cascade(model: CascadeModel, x) -> NDArray[np.float64]:
    """Feed one sample through every stored layer; mean of the last K."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.input_dim,):
        raise DimensionMismatch(model.input_dim, int(x.size))
    if not np.isfinite(x).all():
        raise ValueError("input must be finite")
    raw = x.tolist()
    C = model.n_classes
    current = raw
    last_outputs: list[list[float]] = []
    n_layers = len(model.layers)
    for li, layer in enumerate(model.layers):
        outputs = []
        for forest in layer.forests:
            packed = forest.packed
            acc = [0.0] * C
            for tree in packed:
                p = tree.predict_one(current)
                for c in range(C):
                    acc[c] += p[c]
            n_trees = len(packed)
            outputs.append([a / n_trees for a in acc])
        last_outputs = outputs
        if li + 1 < n_layers:
            nxt = list(raw)
            for out in outputs:
                nxt.extend(out)
            current = nxt
    final = [0.0] * C
    for out in last_outputs:
        for c in range(C):
            final[c] += out[c]
    n_forests = len(last_outputs)
    return np.array([v / n_forests for v in final])


def predict_proba_cascade_batch(
    model: CascadeModel, X: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Matrix variant of predict_proba_cascade; bit-identical per row."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise DimensionMismatch(model.input_dim, int(X.shape[-1]))
    raw = X
    current = X
    outputs: list[NDArray] = []
    n_layers = len(model.layers)
    for li, layer in enumerate(model.layers):
        outputs = [
            predict_proba_forest_batch(forest, current) for forest in layer.forests
        ]
        if li + 1 < n_layers:
            current = np.hstack([raw] + outputs)
    acc = outputs[0].copy()
    for out in outputs[1:]:
        acc += out
    return acc / len(outputs)


def predict(model: CascadeModel, x) -> int:
    """Class id with the highest probability; ties go to the lowest id."""
    return int(predict_proba_cascade(model, x).argmax())


def predict_batch(model: CascadeModel, X) -> NDArray[np.int64]:
    return predict_proba_cascade_batch(model, X).argmax(axis=1).astype(np.int64)


# ------------------------------------------------------------ serialization
#
# Model file schema, format_version 1 (JSON, sorted keys, compact):
#   format_version     1
#   kind               "cascade_model"
#   n_classes          int >= 2
#   input_dim          int >= 1
#   class_names        list of str, or null
#   config             CascadeConfig fields
#   history            list of floats
#   layers             list of layer objects:
#     layer_index        int
#     validation_metric  float
#     forests            list of forest objects:
#       config             {n_trees, kind, seed, tree: {...TreeConfig}}
#       trees              list of flat tree objects:
#         feature    per-node split feature, -1 for leaves
#         threshold  per-node threshold, 0.0 for leaves
#         left/right per-node child indices, -1 for leaves
#         rows/gain  per-node training-row count and impurity decrease
#         counts     per-node class counts for leaves, null for splits
#
# Train timing is runtime metadata and deliberately not stored: equal-seed
# runs must produce byte-identical files.


def _flatten_tree(root: TreeNode) -> dict:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    rows: list[int] = []
    gain: list[float] = []
    counts: list[list[int] | None] = []
    stack: list[tuple[TreeNode, int, bool]] = [(root, -1, False)]
    while stack:
        node, parent, is_right = stack.pop()
        idx = len(feature)
        if parent >= 0:
            if is_right:
                right[parent] = idx
            else:
                left[parent] = idx
        if isinstance(node, Split):
            feature.append(node.feature_index)
            threshold.append(float(node.threshold))
            left.append(-1)
            right.append(-1)
            rows.append(int(node.n_rows))
            gain.append(float(node.impurity_decrease))
            counts.append(None)
            stack.append((node.right, idx, True))
            stack.append((node.left, idx, False))
        else:
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            rows.append(int(node.class_counts.sum()))
            gain.append(0.0)
            counts.append([int(c) for c in node.class_counts])
    return {
        "feature": feature,
        "threshold": threshold,
        "left": left,
        "right": right,
        "rows": rows,
        "gain": gain,
        "counts": counts,
    }


def _tree_config_to_dict(cfg: TreeConfig) -> dict:
    return {
        "max_depth": cfg.max_depth,
        "min_samples_leaf": cfg.min_samples_leaf,
        "min_samples_split": cfg.min_samples_split,
        "n_candidate_features": cfg.n_candidate_features,
        "split_mode": cfg.split_mode,
        "seed": cfg.seed,
    }


def save_model(model: CascadeModel, path) -> None:
    """Write the versioned model document; byte-stable for equal models."""
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "cascade_model",
        "n_classes": model.n_classes,
        "input_dim": model.input_dim,
        "class_names": model.class_names,
        "config": model.config.as_dict(),
        "history": [float(v) for v in model.history],
        "layers": [
            {
                "layer_index": layer.layer_index,
                "validation_metric": float(layer.validation_metric),
                "forests": [
                    {
                        "config": {
                            "n_trees": forest.config.n_trees,
                            "kind": forest.config.kind,
                            "seed": forest.config.seed,
                            "tree": _tree_config_to_dict(forest.config.tree),
                        },
                        "trees": [_flatten_tree(t) for t in forest.trees],
                    }
                    for forest in layer.forests
                ],
            }
            for layer in model.layers
        ],
    }
    payload = json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    path = Path(path)
    try:
        path.write_text(payload, encoding="utf-8")
    except OSError as e:
        raise OutputUnwritable(str(path), str(e)) from None


def _want(obj, key, kinds, path):
    if not isinstance(obj, dict):
        raise SchemaViolation(path, "expected an object")
    if key not in obj:
        raise SchemaViolation(f"{path}.{key}" if path else key, "missing field")
    value = obj[key]
    if kinds is not None and not isinstance(value, kinds):
        raise SchemaViolation(
            f"{path}.{key}" if path else key,
            f"expected {kinds}, got {type(value).__name__}",
        )
    return value


def _int_list(value, path, allow_negative=False):
    if not isinstance(value, list):
        raise SchemaViolation(path, "expected a list")
    out = []
    for i, v in enumerate(value):
        if not isinstance(v, int) or isinstance(v, bool):
            raise SchemaViolation(f"{path}[{i}]", "expected an integer")
        if v < 0 and not allow_negative:
            raise SchemaViolation(f"{path}[{i}]", "must be nonnegative")
        out.append(v)
    return out


def _rebuild_tree(raw: dict, n_classes: int, path: str) -> TreeNode:
    feature = _int_list(_want(raw, "feature", list, path), f"{path}.feature", True)
    n_nodes = len(feature)
    if n_nodes == 0:
        raise SchemaViolation(f"{path}.feature", "tree has no nodes")
    threshold = _want(raw, "threshold", list, path)
    left = _int_list(_want(raw, "left", list, path), f"{path}.left", True)
    right = _int_list(_want(raw, "right", list, path), f"{path}.right", True)
    rows = _int_list(_want(raw, "rows", list, path), f"{path}.rows")
    gain = _want(raw, "gain", list, path)
    counts = _want(raw, "counts", list, path)
    for name, arr in (
        ("threshold", threshold),
        ("left", left),
        ("right", right),
        ("rows", rows),
        ("gain", gain),
        ("counts", counts),
    ):
        if len(arr) != n_nodes:
            raise SchemaViolation(f"{path}.{name}", "length mismatch with feature")

    nodes: list[TreeNode | None] = [None] * n_nodes
    for i in range(n_nodes - 1, -1, -1):
        if feature[i] < 0:
            leaf_counts = counts[i]
            if not isinstance(leaf_counts, list) or len(leaf_counts) != n_classes:
                raise SchemaViolation(
                    f"{path}.counts[{i}]", f"expected {n_classes} class counts"
                )
            arr = np.asarray(
                _int_list(leaf_counts, f"{path}.counts[{i}]"), dtype=np.int64
            )
            if arr.sum() == 0:
                raise SchemaViolation(f"{path}.counts[{i}]", "leaf counts sum to zero")
            nodes[i] = Leaf(class_counts=arr)
        else:
            t = threshold[i]
            if not isinstance(t, (int, float)) or isinstance(t, bool) or not math.isfinite(t):
                raise SchemaViolation(f"{path}.threshold[{i}]", "must be finite")
            li, ri = left[i], right[i]
            for child in (li, ri):
                if not (i < child < n_nodes):
                    raise SchemaViolation(
                        f"{path}.left[{i}]", "child index out of preorder range"
                    )
            g = gain[i]
            if not isinstance(g, (int, float)) or isinstance(g, bool):
                raise SchemaViolation(f"{path}.gain[{i}]", "expected a number")
            nodes[i] = Split(
                feature_index=feature[i],
                threshold=float(t),
                n_rows=rows[i],
                impurity_decrease=float(g),
                left=nodes[li],
                right=nodes[ri],
            )
    assert nodes[0] is not None
    return nodes[0]


def _rebuild_forest(raw: dict, n_classes: int, input_dim: int, path: str) -> ForestModel:
    cfg_raw = _want(raw, "config", dict, path)
    tree_raw = _want(cfg_raw, "tree", dict, f"{path}.config")
    try:
        tree_cfg = TreeConfig(**tree_raw)
        cfg = ForestConfig(
            n_trees=_want(cfg_raw, "n_trees", int, f"{path}.config"),
            kind=_want(cfg_raw, "kind", str, f"{path}.config"),
            seed=_want(cfg_raw, "seed", int, f"{path}.config"),
            tree=tree_cfg,
        )
    except (TypeError, ValueError) as e:
        raise SchemaViolation(f"{path}.config", str(e)) from None
    trees_raw = _want(raw, "trees", list, path)
    if len(trees_raw) != cfg.n_trees:
        raise SchemaViolation(f"{path}.trees", "tree count disagrees with config")
    trees = [
        _rebuild_tree(t, n_classes, f"{path}.trees[{i}]")
        for i, t in enumerate(trees_raw)
    ]
    return ForestModel(trees=trees, config=cfg, n_classes=n_classes, input_dim=input_dim)


def load_model(path) -> CascadeModel:
    """Parse and validate a model document written by save_model.

    Raises:
        UnsupportedVersion: format_version is present but not supported.
        SchemaViolation: anything else wrong with the document.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise SchemaViolation("<document>", f"cannot read file: {e}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaViolation("<document>", f"invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise SchemaViolation("<document>", "expected a top-level object")
    version = _want(doc, "format_version", None, "")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(version)

    n_classes = _want(doc, "n_classes", int, "")
    input_dim = _want(doc, "input_dim", int, "")
    if n_classes < 2:
        raise SchemaViolation("n_classes", "must be at least 2")
    if input_dim < 1:
        raise SchemaViolation("input_dim", "must be at least 1")
    class_names = doc.get("class_names")
    if class_names is not None:
        if not isinstance(class_names, list) or not all(
            isinstance(s, str) for s in class_names
        ):
            raise SchemaViolation("class_names", "expected a list of strings")
        if len(class_names) != n_classes:
            raise SchemaViolation("class_names", "length disagrees with n_classes")
    config = cascade_config_from_dict(_want(doc, "config", dict, ""), "config")
    history_raw = _want(doc, "history", list, "")
    history = []
    for i, v in enumerate(history_raw):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise SchemaViolation(f"history[{i}]", "expected a number")
        history.append(float(v))

    layers_raw = _want(doc, "layers", list, "")
    if not layers_raw:
        raise SchemaViolation("layers", "model has no layers")
    K = config.forests_per_layer
    layers = []
    for i, layer_raw in enumerate(layers_raw):
        lpath = f"layers[{i}]"
        expected_dim = input_dim if i == 0 else input_dim + K * n_classes
        forests_raw = _want(layer_raw, "forests", list, lpath)
        if len(forests_raw) != K:
            raise SchemaViolation(
                f"{lpath}.forests", f"expected {K} forests, got {len(forests_raw)}"
            )
        forests = [
            _rebuild_forest(f, n_classes, expected_dim, f"{lpath}.forests[{j}]")
            for j, f in enumerate(forests_raw)
        ]
        metric = _want(layer_raw, "validation_metric", (int, float), lpath)
        layers.append(
            LayerModel(
                forests=forests,
                layer_index=_want(layer_raw, "layer_index", int, lpath),
                validation_metric=float(metric),
                train_seconds=None,
            )
        )
    return CascadeModel(
        layers=layers,
        n_classes=n_classes,
        input_dim=input_dim,
        config=config,
        history=history,
        class_names=class_names,
    )
