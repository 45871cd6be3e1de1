"""Exception types raised across the package.

Every error that callers are expected to catch has a named class here.
``DataError`` covers problems with user-supplied inputs (files, CSV cells,
images, model documents); the CLI maps it to exit code 2.
"""

from __future__ import annotations


class TreeNetError(Exception):
    """Base class for all package errors."""


class DataError(TreeNetError):
    """Bad user-supplied data or files; CLI exit code 2."""


class MissingLabelColumn(DataError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"label column {column!r} not found in header")


class NonNumericFeature(DataError):
    """A feature cell failed to parse as a number.

    ``row`` is the zero-based data row (header excluded), ``column`` the
    column name.
    """

    def __init__(self, row: int, column: str, value: str = ""):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"non-numeric value {value!r} at row {row}, column {column!r}")


class EmptyDataset(DataError):
    def __init__(self, detail: str = "no data rows"):
        super().__init__(detail)


class NonFiniteValue(DataError):
    def __init__(self, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = f" at row {row}, column {column!r}" if column is not None else ""
        super().__init__(f"non-finite feature value{where}")


class ClassTooSmall(DataError):
    def __init__(self, class_id: int, count: int, needed: int):
        self.class_id = class_id
        self.count = count
        self.needed = needed
        super().__init__(
            f"class {class_id} has {count} samples, needs at least {needed}"
        )


class BadMagic(DataError):
    def __init__(self, magic: bytes):
        self.magic = magic
        super().__init__(f"not a binary PPM file (magic {magic!r})")


class UnsupportedMaxval(DataError):
    def __init__(self, maxval: int):
        self.maxval = maxval
        super().__init__(f"only maxval 255 is supported, got {maxval}")


class TruncatedPixelData(DataError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"expected {expected} pixel bytes, got {got}")


class UnreadableImage(DataError):
    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"cannot read image {path}: {reason}")


class EmptyClass(DataError):
    def __init__(self, directory: str):
        self.directory = directory
        super().__init__(f"class directory {directory} has no decodable images")


class EmptyCounts(TreeNetError):
    def __init__(self) -> None:
        super().__init__("class counts sum to zero")


class DimensionMismatch(TreeNetError):
    def __init__(self, expected: int, got: int, what: str = "feature vector"):
        self.expected = expected
        self.got = got
        super().__init__(f"{what} has length {got}, model expects {expected}")


class LengthMismatch(TreeNetError):
    def __init__(self, n_true: int, n_pred: int):
        super().__init__(f"label arrays differ in length: {n_true} vs {n_pred}")


class LabelOutOfRange(TreeNetError):
    def __init__(self, label: int, n_classes: int):
        self.label = label
        self.n_classes = n_classes
        super().__init__(f"label {label} outside [0, {n_classes})")


class KFoldsTooLarge(TreeNetError):
    def __init__(self, k_folds: int, smallest_class: int):
        self.k_folds = k_folds
        self.smallest_class = smallest_class
        super().__init__(
            f"k_folds={k_folds} exceeds the smallest class count {smallest_class}"
        )


class DegenerateTraining(TreeNetError):
    def __init__(self, detail: str = "training rows contain fewer than 2 classes"):
        super().__init__(detail)


class UnsupportedVersion(DataError):
    def __init__(self, version: object):
        self.version = version
        super().__init__(f"unsupported format_version {version!r}")


class SchemaViolation(DataError):
    """A structured document does not match its schema.

    ``path`` points at the offending location, e.g. ``layers[0].forests[1]``.
    """

    def __init__(self, path: str, detail: str):
        self.path = path
        self.detail = detail
        super().__init__(f"{path}: {detail}")


class OutputUnwritable(DataError):
    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"cannot write {path}: {reason}")
