"""Dataset representation, CSV ingestion, standardization, and stratified splits.

Datasets are immutable: numpy arrays are flagged read-only at construction and
every operation returns a new object. Point ids are stable (row indices of the
source file) and all sampling references ids so runs are reproducible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "LabeledPoint",
    "Dataset",
    "Standardizer",
    "SeededRng",
    "load_csv",
    "fit_standardizer",
    "apply_standardizer",
    "stratified_test_split",
    "stratified_initial_sample",
]


@dataclass(frozen=True)
class LabeledPoint:
    """A single feature vector with its binary label and stable id."""

    id: int
    x: np.ndarray
    y: int


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of labeled points sharing one feature count.

    ``labels`` are 0/1; pools handed to a learner carry labels too, but only a
    label oracle may read them.
    """

    ids: np.ndarray
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ids", _readonly(np.asarray(self.ids, dtype=np.int64)))
        object.__setattr__(self, "features", _readonly(np.asarray(self.features, dtype=np.float64)))
        object.__setattr__(self, "labels", _readonly(np.asarray(self.labels, dtype=np.int64)))
        if self.features.ndim != 2:
            raise DataError("features must be a 2-D array")
        n = len(self.ids)
        if self.features.shape[0] != n or self.labels.shape[0] != n:
            raise DataError("ids, features and labels must have equal length")
        if n and not np.all(np.isfinite(self.features)):
            raise DataError("features contain NaN or Inf")
        if n and not np.all((self.labels == 0) | (self.labels == 1)):
            raise DataError("labels must be 0 or 1")
        if len(np.unique(self.ids)) != n:
            raise DataError("point ids must be unique")

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self) -> Iterator[LabeledPoint]:
        for i in range(len(self.ids)):
            yield self.point(i)

    def point(self, index: int) -> LabeledPoint:
        return LabeledPoint(int(self.ids[index]), self.features[index], int(self.labels[index]))

    def class_counts(self) -> tuple[int, int]:
        return int(np.sum(self.labels == 0)), int(np.sum(self.labels == 1))

    def take(self, positions: Sequence[int]) -> "Dataset":
        """New dataset from row positions (not ids); order follows ``positions``."""
        pos = np.asarray(positions, dtype=np.int64)
        return Dataset(self.ids[pos], self.features[pos], self.labels[pos])

    def select_ids(self, wanted: Sequence[int]) -> "Dataset":
        """Subset by id, keeping this dataset's row order."""
        mask = np.isin(self.ids, np.asarray(list(wanted), dtype=np.int64))
        return self.take(np.flatnonzero(mask))

    def drop_ids(self, unwanted: Sequence[int]) -> "Dataset":
        mask = np.isin(self.ids, np.asarray(list(unwanted), dtype=np.int64))
        return self.take(np.flatnonzero(~mask))

    def concat(self, other: "Dataset") -> "Dataset":
        if self.n_features != other.n_features:
            raise DataError("feature counts differ")
        return Dataset(
            np.concatenate([self.ids, other.ids]),
            np.vstack([self.features, other.features]),
            np.concatenate([self.labels, other.labels]),
        )


@dataclass(frozen=True)
class Standardizer:
    """Per-feature z-score transform; zero-variance features get scale 1."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _readonly(np.asarray(self.mean, dtype=np.float64)))
        object.__setattr__(self, "scale", _readonly(np.asarray(self.scale, dtype=np.float64)))


@dataclass
class SeededRng:
    """Deterministic random source: a named, portable generator behind a 64-bit seed.

    Identical seeds produce identical draw sequences on any platform. All
    toolkit operations that sample take one of these, so a run is a pure
    function of (inputs, seed).
    """

    seed: int
    algorithm: str = "pcg64"
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.algorithm != "pcg64":
            raise ValueError(f"unsupported rng algorithm: {self.algorithm}")
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def sample_without_replacement(self, items: Sequence[int], k: int) -> list[int]:
        """Draw k distinct items uniformly; order is the draw order."""
        if k > len(items):
            raise ValueError(f"cannot draw {k} from {len(items)} items")
        picked = self._gen.choice(np.asarray(items, dtype=np.int64), size=k, replace=False)
        return [int(v) for v in picked]

    def pick_one(self, items: Sequence[int]) -> int:
        return self.sample_without_replacement(items, 1)[0]


def load_csv(path) -> Dataset:
    """Load a dataset from CSV: header row, numeric feature columns, final column ``label``.

    Ids are assigned 0..N-1 in row order. Raises :class:`DataError` naming the
    offending row/column on malformed input.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[-1] != "label":
            raise DataError(f"{path}: header must end with a 'label' column (got {header[-1:] or 'nothing'})")
        n_features = len(header) - 1
        rows, labels = [], []
        for row_no, row in enumerate(reader):
            if len(row) != n_features + 1:
                raise DataError(f"{path}: row {row_no} has {len(row)} columns, expected {n_features + 1}")
            feats = np.empty(n_features)
            for col in range(n_features):
                try:
                    feats[col] = float(row[col])
                except ValueError:
                    raise DataError(
                        f"{path}: row {row_no}, column '{header[col]}': non-numeric value {row[col]!r}"
                    ) from None
            if not np.all(np.isfinite(feats)):
                raise DataError(f"{path}: row {row_no}: non-finite feature value")
            try:
                raw = float(row[-1])
            except ValueError:
                raise DataError(f"{path}: row {row_no}: label {row[-1]!r} is not numeric") from None
            if raw not in (0.0, 1.0):
                raise DataError(f"{path}: row {row_no}: label must be 0 or 1, got {row[-1]!r}")
            rows.append(feats)
            labels.append(int(raw))
    features = np.array(rows) if rows else np.empty((0, n_features))
    return Dataset(np.arange(len(rows)), features, np.array(labels, dtype=np.int64))


def fit_standardizer(data: Dataset) -> Standardizer:
    """Fit per-feature mean/std on ``data``; std 0 is replaced by 1."""
    if len(data) == 0:
        raise DataError("cannot fit a standardizer on an empty dataset")
    mean = data.features.mean(axis=0)
    scale = data.features.std(axis=0)
    scale = np.where(scale == 0.0, 1.0, scale)
    return Standardizer(mean, scale)


def apply_standardizer(s: Standardizer, data: Dataset) -> Dataset:
    if len(s.mean) != data.n_features:
        raise DataError("standardizer feature count does not match dataset")
    return Dataset(data.ids, (data.features - s.mean) / s.scale, data.labels)


def _split_per_class(data: Dataset, per_class: int, rng: SeededRng, what: str) -> tuple[Dataset, Dataset]:
    chosen: list[int] = []
    for cls in (0, 1):
        cls_ids = sorted(int(i) for i in data.ids[data.labels == cls])
        if len(cls_ids) < per_class:
            raise DataError(
                f"class {cls} has only {len(cls_ids)} points, {what} needs {per_class} per class"
            )
        chosen.extend(rng.sample_without_replacement(cls_ids, per_class))
    picked = data.select_ids(chosen)
    rest = data.drop_ids(chosen)
    return picked, rest


def stratified_test_split(data: Dataset, per_class: int, rng: SeededRng) -> tuple[Dataset, Dataset]:
    """Hold out ``per_class`` points of each class, uniformly without replacement."""
    return _split_per_class(data, per_class, rng, "test split")


def stratified_initial_sample(data: Dataset, per_class: int, rng: SeededRng) -> tuple[Dataset, Dataset]:
    """Draw the stratified initial labeled sample; the remainder becomes the pool."""
    return _split_per_class(data, per_class, rng, "initial sample")
