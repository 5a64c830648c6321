"""Dataset ingestion, z-score standardization and feature-weight application."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class DatasetError(ValueError):
    """Base class for dataset loading failures."""


class MissingFileError(DatasetError, FileNotFoundError):
    pass


class NonNumericCellError(DatasetError):
    """A cell could not be parsed as a finite real number."""


class MissingLabelColumnError(DatasetError):
    pass


class RowLengthError(DatasetError):
    """A data row has a different number of cells than the header."""


class WeightLengthError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    feature_names: tuple[str, ...]
    true_labels: Optional[np.ndarray] = None
    name: str = "dataset"

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            raise DatasetError(f"features must be 2-D, got shape {X.shape}")
        n, m = X.shape
        if n < 2 or m < 1:
            raise DatasetError(f"need n_samples >= 2 and n_features >= 1, got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise NonNumericCellError("features contain non-finite values")
        if len(self.feature_names) != m:
            raise DatasetError(f"{len(self.feature_names)} feature names for {m} columns")
        X.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if self.true_labels is not None:
            y = np.asarray(self.true_labels, dtype=np.int64)
            if y.shape != (n,):
                raise DatasetError(f"true_labels has shape {y.shape}, expected ({n},)")
            y.setflags(write=False)
            object.__setattr__(self, "true_labels", y)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def without_labels(self) -> "Dataset":
        return replace(self, true_labels=None)


@dataclass(frozen=True)
class StandardizationParams:
    """Per-column mean and population std; ``constant`` marks zero-variance columns."""

    means: np.ndarray
    stds: np.ndarray
    constant: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.constant is None:
            object.__setattr__(self, "constant", np.asarray(self.stds) == 0)


def _parse_cell(text: str, row: int, col: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise NonNumericCellError(f"row {row}, column {col!r}: cannot parse {text!r}") from None
    if not math.isfinite(value):
        raise NonNumericCellError(f"row {row}, column {col!r}: non-finite value {text!r}")
    return value


def load_dataset(path, label_column: Optional[str] = None, name: Optional[str] = None) -> Dataset:
    """Read a comma-delimited UTF-8 file with a header row.

    The optional ``label_column`` is moved into ``true_labels``; its values may be
    arbitrary strings and are mapped to 0..k-1 in order of first appearance.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"no such dataset file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path} is empty") from None
        rows = [r for r in reader if r]

    label_idx = None
    if label_column is not None:
        if label_column not in header:
            raise MissingLabelColumnError(f"label column {label_column!r} not in header of {path}")
        label_idx = header.index(label_column)

    feature_cols = [i for i in range(len(header)) if i != label_idx]
    X = np.empty((len(rows), len(feature_cols)))
    raw_labels = []
    for r, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise RowLengthError(f"{path}:{r} has {len(row)} cells, header has {len(header)}")
        for j, c in enumerate(feature_cols):
            X[r - 2, j] = _parse_cell(row[c].strip(), r, header[c])
        if label_idx is not None:
            raw_labels.append(row[label_idx].strip())

    labels = None
    if label_idx is not None:
        codes: dict[str, int] = {}
        labels = np.array([codes.setdefault(v, len(codes)) for v in raw_labels], dtype=np.int64)
    return Dataset(X, tuple(header[c] for c in feature_cols), labels, name or path.stem)


def standardize(d: Dataset) -> tuple[Dataset, StandardizationParams]:
    """Z-score every column with the population std (divide by n).

    Constant columns become all-zero and are flagged in the returned params.
    """
    X = d.features
    means = X.mean(axis=0)
    centered = X - means
    stds = np.sqrt((centered**2).mean(axis=0))
    # relative test so float round-off on a constant column does not pass as variance
    scale = np.maximum(np.abs(means), 1.0)
    constant = stds <= 1e-12 * scale
    stds = np.where(constant, 0.0, stds)
    Z = np.where(constant, 0.0, centered / np.where(constant, 1.0, stds))
    return replace(d, features=Z), StandardizationParams(means, stds, constant)


def unstandardize(d: Dataset, params: StandardizationParams) -> Dataset:
    X = d.features * np.where(params.constant, 0.0, params.stds) + params.means
    return replace(d, features=X)


def normalize_weights(raw: Sequence[float]) -> np.ndarray:
    """Scale a nonnegative vector to sum 1; an all-zero vector becomes uniform."""
    w = np.asarray(raw, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-D vector")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        return np.full(w.size, 1.0 / w.size)
    return w / total


def check_weight_vector(w, n_features: Optional[int] = None, atol: float = 1e-9) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1:
        raise ValueError("weight vector must be 1-D")
    if n_features is not None and w.size != n_features:
        raise WeightLengthError(f"{w.size} weights for {n_features} features")
    if np.any(w < 0) or abs(w.sum() - 1.0) > atol:
        raise ValueError("weight vector must be nonnegative and sum to 1")
    return w


def apply_weights(d: Dataset, w) -> Dataset:
    """Multiply column j by ``w[j]``; labels and names are carried through."""
    w = np.asarray(w, dtype=float)
    if w.shape != (d.n_features,):
        raise WeightLengthError(f"{w.size} weights for {d.n_features} features")
    return replace(d, features=d.features * w)
