"""Cascade-of-forests classifier with metrics, featurizer, and bench harness.

The public surface re-exported here covers the everyday workflow: build or
load a dataset, fit a cascade, evaluate it, persist it, and sweep it with
the experiment harness. Lower-level pieces (single trees, PPM decoding,
figure rendering) stay importable from their own modules.
"""

from __future__ import annotations

from .bench import (
    CsvSource,
    ExperimentConfig,
    ImageDirSource,
    RunReport,
    SyntheticSpec,
    emit_report,
    load_report,
    measure_fps,
    nn_flops,
    nn_inference_cost,
    nn_training_cost,
    run_experiment,
)
from .cascade import (
    CascadeConfig,
    CascadeModel,
    fit_cascade,
    load_model,
    predict,
    predict_batch,
    predict_proba_cascade,
    predict_proba_cascade_batch,
    save_model,
)
from .data import (
    ChunkSpec,
    Dataset,
    load_csv,
    make_blobs,
    save_csv,
    stratified_chunk,
    stratified_split,
)
from .errors import DataError, SchemaViolation, TreeNetError, UnsupportedVersion
from .featurize import FEATURE_NAMES, N_FEATURES, featurize_directory, texture_features
from .forest import ForestConfig, ForestModel, fit_forest, predict_proba_forest_batch
from .metrics import (
    ConfusionMatrix,
    MetricsReport,
    confusion,
    evaluate_predictions,
    metrics_report,
    weighted_f1,
)
from .seeding import derive_seed

__version__ = "0.1.0"

__all__ = [
    "CascadeConfig",
    "CascadeModel",
    "ChunkSpec",
    "ConfusionMatrix",
    "CsvSource",
    "DataError",
    "Dataset",
    "ExperimentConfig",
    "FEATURE_NAMES",
    "ForestConfig",
    "ForestModel",
    "ImageDirSource",
    "MetricsReport",
    "N_FEATURES",
    "RunReport",
    "SchemaViolation",
    "SyntheticSpec",
    "TreeNetError",
    "UnsupportedVersion",
    "__version__",
    "confusion",
    "derive_seed",
    "emit_report",
    "evaluate_predictions",
    "featurize_directory",
    "fit_cascade",
    "fit_forest",
    "load_csv",
    "load_model",
    "load_report",
    "make_blobs",
    "measure_fps",
    "metrics_report",
    "nn_flops",
    "nn_inference_cost",
    "nn_training_cost",
    "predict",
    "predict_batch",
    "predict_proba_cascade",
    "predict_proba_cascade_batch",
    "predict_proba_forest_batch",
    "run_experiment",
    "save_csv",
    "save_model",
    "stratified_chunk",
    "stratified_split",
    "texture_features",
    "weighted_f1",
]
