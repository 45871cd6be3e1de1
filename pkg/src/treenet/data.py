"""Dataset container, CSV ingestion, stratified sampling, synthetic blobs.

A Dataset is an immutable bundle of a float64 feature matrix, dense integer
labels, and the string names behind both axes. Class ids always follow
first-appearance order of the label strings, so reloading a written file
reproduces the same ids.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .errors import (
    ClassTooSmall,
    DataError,
    EmptyDataset,
    MissingLabelColumn,
    NonFiniteValue,
    NonNumericFeature,
)
from .seeding import derive_seed


@dataclass
class Dataset:
    """Feature matrix plus labels; immutable after construction."""

    features: NDArray[np.float64]
    labels: NDArray[np.int64]
    class_names: list[str]
    feature_names: list[str]

    def __post_init__(self) -> None:
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        n, d = features.shape
        if n == 0:
            raise EmptyDataset()
        if d < 1:
            raise ValueError("need at least one feature column")
        if labels.shape != (n,):
            raise ValueError("labels length must match feature rows")
        if len(self.class_names) < 2:
            raise ValueError("need at least two classes")
        if len(self.feature_names) != d:
            raise ValueError("feature_names length must match feature columns")
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.class_names)):
            raise ValueError("labels must index class_names")
        if not np.isfinite(features).all():
            raise NonFiniteValue()
        features.setflags(write=False)
        labels.setflags(write=False)
        self.features = features
        self.labels = labels

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> NDArray[np.int64]:
        return np.bincount(self.labels, minlength=self.n_classes).astype(np.int64)

    def subset(self, rows) -> "Dataset":
        """New Dataset keeping the given row indices (order preserved)."""
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            features=self.features[rows],
            labels=self.labels[rows],
            class_names=list(self.class_names),
            feature_names=list(self.feature_names),
        )


@dataclass(frozen=True)
class ChunkSpec:
    """How much of each class to keep, and under which seed."""

    fraction: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.fraction <= 1.0):
            raise ValueError("fraction must be in (0, 1]")


def _round_half_away(x: float) -> int:
    """round() with halves away from zero, for nonnegative x."""
    return int(math.floor(x + 0.5))


def load_csv(path, label_column: str = "label") -> Dataset:
    """Load a comma-separated file with one header row into a Dataset.

    Every column except ``label_column`` is parsed as a 64-bit real. Labels
    are mapped to dense ids in first-appearance order; the original strings
    are kept in class_names.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path} is empty") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise MissingLabelColumn(label_column)
        label_idx = header.index(label_column)
        feature_names = [h for i, h in enumerate(header) if i != label_idx]
        if not feature_names:
            raise EmptyDataset(f"{path} has no feature columns")

        rows: list[list[float]] = []
        label_strings: list[str] = []
        for r, record in enumerate(reader):
            if not record or (len(record) == 1 and record[0].strip() == ""):
                continue
            if len(record) != len(header):
                raise DataError(
                    f"row {r} has {len(record)} cells, header has {len(header)}"
                )
            values = []
            for i, cell in enumerate(record):
                if i == label_idx:
                    continue
                name = header[i] if i < len(header) else f"col{i}"
                try:
                    v = float(cell)
                except ValueError:
                    raise NonNumericFeature(r, name, cell.strip()) from None
                if not math.isfinite(v):
                    raise NonFiniteValue(r, name)
                values.append(v)
            rows.append(values)
            label_strings.append(record[label_idx].strip())

    if not rows:
        raise EmptyDataset(f"{path} has no data rows")

    class_names: list[str] = []
    seen: dict[str, int] = {}
    labels = np.empty(len(label_strings), dtype=np.int64)
    for i, s in enumerate(label_strings):
        if s not in seen:
            seen[s] = len(class_names)
            class_names.append(s)
        labels[i] = seen[s]

    return Dataset(
        features=np.array(rows, dtype=np.float64),
        labels=labels,
        class_names=class_names,
        feature_names=feature_names,
    )


def save_csv(dataset: Dataset, path, label_column: str = "label") -> None:
    """Write a Dataset back out in the schema load_csv reads."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(dataset.feature_names) + [label_column])
        for x, y in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in x] + [dataset.class_names[y]])


def _per_class_indices(labels: NDArray[np.int64], n_classes: int) -> list[NDArray]:
    return [np.flatnonzero(labels == c) for c in range(n_classes)]


def stratified_chunk(dataset: Dataset, spec: ChunkSpec) -> Dataset:
    """Keep max(1, round_half_away(fraction * class_count)) rows per class.

    Rows are drawn without replacement via a seeded permutation per class,
    then re-sorted into the original row order, so fraction 1.0 returns the
    dataset unchanged.
    """
    keep: list[NDArray] = []
    for c, idx in enumerate(_per_class_indices(dataset.labels, dataset.n_classes)):
        if idx.size == 0:
            continue
        count = min(idx.size, max(1, _round_half_away(spec.fraction * idx.size)))
        rng = np.random.default_rng(derive_seed(spec.seed, [c]))
        keep.append(rng.permutation(idx)[:count])
    rows = np.sort(np.concatenate(keep))
    return dataset.subset(rows)


def stratified_split(
    dataset: Dataset, test_fraction: float, seed: int = 0
) -> tuple[Dataset, Dataset]:
    """Partition rows into train and test, stratified by class.

    Per-class test count is max(1, round_half_away(test_fraction * n_c)),
    capped at n_c - 1 so every class keeps at least one training row.

    Raises:
        ClassTooSmall: some class has fewer than 2 rows.
    """
    if not (0.0 < test_fraction < 1.0):
        raise ValueError("test_fraction must be in (0, 1)")
    test_rows: list[NDArray] = []
    train_rows: list[NDArray] = []
    for c, idx in enumerate(_per_class_indices(dataset.labels, dataset.n_classes)):
        if idx.size < 2:
            raise ClassTooSmall(c, int(idx.size), 2)
        count = min(idx.size - 1, max(1, _round_half_away(test_fraction * idx.size)))
        rng = np.random.default_rng(derive_seed(seed, [c]))
        perm = rng.permutation(idx)
        test_rows.append(perm[:count])
        train_rows.append(perm[count:])
    train = np.sort(np.concatenate(train_rows))
    test = np.sort(np.concatenate(test_rows))
    return dataset.subset(train), dataset.subset(test)


def blob_center(k: int, d: int) -> NDArray[np.float64]:
    """Center of synthetic class k: 4*k at component k mod d, zero elsewhere."""
    center = np.zeros(d)
    center[k % d] = 4.0 * k
    return center


def make_blobs(
    n_classes: int, n_per_class: int, d: int, spread: float, seed: int = 0
) -> Dataset:
    """Gaussian point clouds around deterministic per-class centers."""
    if n_classes < 2:
        raise ValueError("need at least two classes")
    if n_per_class < 1:
        raise ValueError("need at least one sample per class")
    if d < 1:
        raise ValueError("need at least one feature")
    if spread <= 0:
        raise ValueError("spread must be positive")
    rng = np.random.default_rng(derive_seed(seed, [n_classes, n_per_class, d]))
    blocks = []
    for k in range(n_classes):
        noise = rng.normal(0.0, spread, size=(n_per_class, d))
        blocks.append(blob_center(k, d) + noise)
    features = np.vstack(blocks)
    labels = np.repeat(np.arange(n_classes, dtype=np.int64), n_per_class)
    return Dataset(
        features=features,
        labels=labels,
        class_names=[f"class_{k}" for k in range(n_classes)],
        feature_names=[f"f{j}" for j in range(d)],
    )
