"""Experiment harness: data-fraction sweeps, timing, throughput, cost models.

A sweep carves one fixed stratified test split, then for every
(fraction, repeat) cell chunks the training pool, fits a cascade, and
records wall-clock training seconds, test metrics, and single-sample
inference throughput. Reports land in two files: a versioned structured
document with full detail and a flat delimited table.
"""

from __future__ import annotations

import json
import statistics
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cascade import (
    CascadeConfig,
    CascadeModel,
    cascade_config_from_dict,
    fit_cascade,
    predict,
    predict_batch,
)
from .data import ChunkSpec, Dataset, load_csv, make_blobs, stratified_chunk, stratified_split
from .errors import OutputUnwritable, SchemaViolation
from .featurize import featurize_directory
from .metrics import confusion, evaluate_predictions
from .seeding import derive_seed

DEFAULT_FRACTIONS = (0.05, 0.10, 0.40, 0.50, 0.90, 1.0)

REPORT_COLUMNS = (
    "chunk",
    "size",
    "train_seconds",
    "accuracy",
    "precision_weighted",
    "recall_weighted",
    "f1_weighted",
    "mcc",
    "fps",
)

REPORT_FORMAT_VERSION = 1


# ------------------------------------------------------------------ sources
@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian-blob source for self-contained experiments."""

    n_classes: int = 10
    n_per_class: int = 100
    d: int = 20
    spread: float = 1.0
    seed: int = 0


@dataclass(frozen=True)
class CsvSource:
    path: str
    label_column: str = "label"


@dataclass(frozen=True)
class ImageDirSource:
    path: str


DataSource = SyntheticSpec | CsvSource | ImageDirSource


def load_source(source: DataSource) -> Dataset:
    if isinstance(source, SyntheticSpec):
        return make_blobs(
            n_classes=source.n_classes,
            n_per_class=source.n_per_class,
            d=source.d,
            spread=source.spread,
            seed=source.seed,
        )
    if isinstance(source, CsvSource):
        return load_csv(source.path, label_column=source.label_column)
    if isinstance(source, ImageDirSource):
        return featurize_directory(source.path, problems=[])
    raise TypeError(f"unknown data source {source!r}")


def _source_to_dict(source: DataSource) -> dict:
    if isinstance(source, SyntheticSpec):
        return {
            "kind": "synthetic",
            "n_classes": source.n_classes,
            "n_per_class": source.n_per_class,
            "d": source.d,
            "spread": source.spread,
            "seed": source.seed,
        }
    if isinstance(source, CsvSource):
        return {"kind": "csv", "path": source.path, "label_column": source.label_column}
    return {"kind": "image_dir", "path": source.path}


def _source_from_dict(raw: dict, path: str) -> DataSource:
    if not isinstance(raw, dict):
        raise SchemaViolation(path, "expected an object")
    kind = raw.get("kind")
    rest = {k: v for k, v in raw.items() if k != "kind"}
    try:
        if kind == "synthetic":
            return SyntheticSpec(**rest)
        if kind == "csv":
            return CsvSource(**rest)
        if kind == "image_dir":
            return ImageDirSource(**rest)
    except TypeError as e:
        raise SchemaViolation(path, str(e)) from None
    raise SchemaViolation(f"{path}.kind", f"unknown source kind {kind!r}")


# ------------------------------------------------------------------- config
@dataclass
class ExperimentConfig:
    source: DataSource = field(default_factory=SyntheticSpec)
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    test_fraction: float = 0.2
    repeats: int = 3
    cascade: CascadeConfig = field(default_factory=CascadeConfig)
    seed: int = 0
    output: str | None = None

    def __post_init__(self) -> None:
        fractions = tuple(float(f) for f in self.fractions)
        if not fractions:
            raise ValueError("fractions must be nonempty")
        for f in fractions:
            if not 0.0 < f <= 1.0:
                raise ValueError(f"fraction {f} outside (0, 1]")
        if list(fractions) != sorted(fractions):
            raise ValueError("fractions must be sorted ascending")
        self.fractions = fractions
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0, 1)")
        if self.repeats < 1:
            raise ValueError("repeats must be positive")

    def as_dict(self) -> dict:
        return {
            "source": _source_to_dict(self.source),
            "fractions": list(self.fractions),
            "test_fraction": self.test_fraction,
            "repeats": self.repeats,
            "cascade": self.cascade.as_dict(),
            "seed": self.seed,
            "output": self.output,
        }


def experiment_config_from_dict(raw: dict, path: str = "config") -> ExperimentConfig:
    """Parse an experiment config mapping, rejecting unknown keys."""
    if not isinstance(raw, dict):
        raise SchemaViolation(path, "expected an object")
    known = {
        "source",
        "fractions",
        "test_fraction",
        "repeats",
        "cascade",
        "seed",
        "output",
    }
    for key in raw:
        if key not in known:
            raise SchemaViolation(f"{path}.{key}", f"unknown config key {key!r}")
    kwargs: dict = {}
    if "source" in raw:
        kwargs["source"] = _source_from_dict(raw["source"], f"{path}.source")
    if "cascade" in raw:
        kwargs["cascade"] = cascade_config_from_dict(raw["cascade"], f"{path}.cascade")
    for key in ("fractions", "test_fraction", "repeats", "seed", "output"):
        if key in raw:
            kwargs[key] = raw[key]
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as e:
        raise SchemaViolation(path, str(e)) from None


# ------------------------------------------------------------------- report
@dataclass
class RunRow:
    chunk: float
    repeat: int
    size: int
    train_seconds: float
    fps: float
    scalars: dict[str, float]
    confusion: list[list[int]]


@dataclass
class FractionSummary:
    chunk: float
    size: int
    medians: dict[str, float]


@dataclass
class RunReport:
    config: dict
    test_size: int
    rows: list[RunRow]
    summaries: list[FractionSummary]


def _summarize(rows: list[RunRow]) -> list[FractionSummary]:
    summaries = []
    for chunk in sorted({r.chunk for r in rows}):
        group = [r for r in rows if r.chunk == chunk]
        medians = {
            "train_seconds": statistics.median(r.train_seconds for r in group),
            "fps": statistics.median(r.fps for r in group),
        }
        for key in group[0].scalars:
            medians[key] = statistics.median(r.scalars[key] for r in group)
        summaries.append(
            FractionSummary(chunk=chunk, size=group[0].size, medians=medians)
        )
    return summaries


# -------------------------------------------------------------- throughput
def measure_fps(model: CascadeModel, probe: Dataset, repeats: int = 3) -> float:
    """Median over timed passes of sequential single-sample predictions."""
    if probe.n_samples < 1:
        raise ValueError("probe must be nonempty")
    if repeats < 1:
        raise ValueError("repeats must be positive")
    rows = [probe.features[i] for i in range(probe.n_samples)]
    for x in rows:  # warm-up pass
        predict(model, x)
    per_pass = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for x in rows:
            predict(model, x)
        elapsed = time.perf_counter() - t0
        per_pass.append(len(rows) / elapsed)
    return float(statistics.median(per_pass))


# -------------------------------------------------------------- experiment
def run_experiment(config: ExperimentConfig, n_workers: int = 1) -> RunReport:
    """Run the full sweep; write report files when config.output is set."""
    data = load_source(config.source)
    train_pool, test = stratified_split(
        data, config.test_fraction, seed=derive_seed(config.seed, [0])
    )
    rows: list[RunRow] = []
    for fi, fraction in enumerate(config.fractions):
        for r in range(config.repeats):
            chunk_seed = derive_seed(config.seed, [fi + 1, r])
            cell_cascade = replace(
                config.cascade, seed=derive_seed(config.seed, [fi + 1, r, 1])
            )
            chunk = stratified_chunk(
                train_pool, ChunkSpec(fraction=fraction, seed=chunk_seed)
            )
            t0 = time.perf_counter()
            model = fit_cascade(chunk, cell_cascade, n_workers=n_workers)
            train_seconds = time.perf_counter() - t0
            preds = predict_batch(model, test.features)
            report = evaluate_predictions(test.labels, preds, test.n_classes)
            cells = confusion(test.labels, preds, test.n_classes).counts
            fps = measure_fps(model, test, repeats=config.repeats)
            rows.append(
                RunRow(
                    chunk=fraction,
                    repeat=r,
                    size=chunk.n_samples,
                    train_seconds=train_seconds,
                    fps=fps,
                    scalars=report.scalars(),
                    confusion=cells.tolist(),
                )
            )
    out = RunReport(
        config=config.as_dict(),
        test_size=test.n_samples,
        rows=rows,
        summaries=_summarize(rows),
    )
    if config.output is not None:
        emit_report(out, config.output)
    return out


# ------------------------------------------------------------- cost models
@dataclass
class NnCostParams:
    """Analytical-cost inputs; only the fields a given form needs are set."""

    L: int | None = None
    N: int | None = None
    D: int | None = None
    B: int | None = None
    e: int | None = None
    widths: tuple[int, ...] | None = None
    E: int | None = None

    def __post_init__(self) -> None:
        for name in ("L", "N", "D", "B", "e", "E"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValueError(f"{name} must be positive")
        if self.widths is not None:
            self.widths = tuple(int(w) for w in self.widths)
            if len(self.widths) < 2:
                raise ValueError("widths needs at least an input and output layer")
            if any(w < 1 for w in self.widths):
                raise ValueError("layer widths must be positive")
        if self.B is not None and self.D is not None and self.B > self.D:
            raise ValueError("batch size cannot exceed training-set size")


def nn_inference_cost(L: int, N: int) -> int:
    """Per-sample operation count for L equal-width layers of N neurons."""
    if L < 1 or N < 1:
        raise ValueError("L and N must be positive")
    return L * (N * N + 2 * N)


def nn_training_cost(e: int, D: int, B: int, L: int, N: int) -> float:
    """Total training operations; D/B is a real quotient, not ceil."""
    if min(e, D, B, L, N) < 1:
        raise ValueError("all parameters must be positive")
    if B > D:
        raise ValueError("batch size cannot exceed training-set size")
    return e * (D / B) * (2 * L * (N * N + 2 * N) + L * N * N)


def nn_flops(widths, E: int) -> tuple[int, int]:
    """(forward, total) multiply counts for per-layer widths n_0..n_L."""
    widths = [int(w) for w in widths]
    if len(widths) < 2:
        raise ValueError("widths needs at least an input and output layer")
    if any(w < 1 for w in widths):
        raise ValueError("layer widths must be positive")
    if E < 1:
        raise ValueError("E must be positive")
    forward = 0
    for a, b in zip(widths[:-1], widths[1:]):
        forward += a * b
    return forward, 2 * E * forward


# ------------------------------------------------------------ report files
def _report_paths(path) -> tuple[Path, Path]:
    path = Path(path)
    if path.suffix == ".json":
        return path, path.with_suffix(".csv")
    if path.suffix == ".csv":
        return path.with_suffix(".json"), path
    return path.with_suffix(".json"), path.with_suffix(".csv")


def report_to_dict(report: RunReport) -> dict:
    return {
        "format_version": REPORT_FORMAT_VERSION,
        "kind": "run_report",
        "config": report.config,
        "test_size": report.test_size,
        "rows": [
            {
                "chunk": r.chunk,
                "repeat": r.repeat,
                "size": r.size,
                "train_seconds": r.train_seconds,
                "fps": r.fps,
                "scalars": r.scalars,
                "confusion": r.confusion,
            }
            for r in report.rows
        ],
        "summaries": [
            {"chunk": s.chunk, "size": s.size, "medians": s.medians}
            for s in report.summaries
        ],
    }


def report_table(report: RunReport) -> str:
    """The flat delimited table, header exactly as published."""
    lines = [",".join(REPORT_COLUMNS)]
    for r in report.rows:
        lines.append(
            ",".join(
                [
                    repr(r.chunk),
                    str(r.size),
                    repr(r.train_seconds),
                    repr(r.scalars["accuracy"]),
                    repr(r.scalars["precision_weighted"]),
                    repr(r.scalars["recall_weighted"]),
                    repr(r.scalars["f1_weighted"]),
                    repr(r.scalars["mcc"]),
                    repr(r.fps),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def emit_report(report: RunReport, path) -> tuple[Path, Path]:
    """Write <base>.json (full detail) and <base>.csv (flat table)."""
    json_path, csv_path = _report_paths(path)
    payload = json.dumps(report_to_dict(report), sort_keys=True) + "\n"
    try:
        json_path.parent.mkdir(parents=True, exist_ok=True)
        json_path.write_text(payload, encoding="utf-8")
        csv_path.write_text(report_table(report), encoding="utf-8")
    except OSError as err:
        raise OutputUnwritable(str(path), str(err)) from None
    return json_path, csv_path


def load_report(path) -> RunReport:
    """Rebuild a RunReport from its structured document."""
    json_path, _ = _report_paths(path)
    try:
        doc = json.loads(json_path.read_text(encoding="utf-8"))
    except OSError as e:
        raise SchemaViolation("<document>", f"cannot read file: {e}") from None
    except json.JSONDecodeError as e:
        raise SchemaViolation("<document>", f"invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise SchemaViolation("<document>", "expected a top-level object")
    version = doc.get("format_version")
    if version != REPORT_FORMAT_VERSION:
        raise SchemaViolation("format_version", f"unsupported version {version!r}")
    try:
        rows = [
            RunRow(
                chunk=r["chunk"],
                repeat=r["repeat"],
                size=r["size"],
                train_seconds=r["train_seconds"],
                fps=r["fps"],
                scalars=r["scalars"],
                confusion=r["confusion"],
            )
            for r in doc["rows"]
        ]
        summaries = [
            FractionSummary(chunk=s["chunk"], size=s["size"], medians=s["medians"])
            for s in doc["summaries"]
        ]
        return RunReport(
            config=doc["config"],
            test_size=doc["test_size"],
            rows=rows,
            summaries=summaries,
        )
    except (KeyError, TypeError) as e:
        raise SchemaViolation("<document>", f"malformed report: {e}") from None
