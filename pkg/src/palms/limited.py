"""Dataset-difficulty analysis via class mixing in k-nearest neighborhoods.

A test point is "limited" when more than rho*k of its k nearest neighbors
(Euclidean distance on standardized features, query excluded by id) belong to
the neighborhood's minority class. The fraction of limited test points is a
proxy for how hard the dataset is to classify: mixed neighborhoods mean
uncertain regions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DataError
from .svm import squared_distances

__all__ = ["LimitedSetParams", "LimitedSetReport", "is_limited", "limited_fraction", "limited_report"]


@dataclass(frozen=True)
class LimitedSetParams:
    k: int = 20
    rho: float = 0.3

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not (0.0 < self.rho <= 0.5):
            raise ValueError("rho must be in (0, 0.5]")


@dataclass(frozen=True)
class LimitedSetReport:
    member_ids: tuple[int, ...]
    fraction: float
    params: LimitedSetParams


def _neighborhood_minority(query_id: int, query_x: np.ndarray, reference: Dataset,
                           params: LimitedSetParams) -> int:
    d2 = squared_distances(query_x.reshape(1, -1), reference.features)[0]
    keep = reference.ids != query_id
    if keep.sum() < params.k:
        raise DataError(
            f"reference set has {int(keep.sum())} usable points, need at least k={params.k}"
        )
    ids = reference.ids[keep]
    labels = reference.labels[keep]
    d2 = d2[keep]
    order = np.lexsort((ids, d2))[: params.k]  # distance ties go to the smaller id
    ones = int(labels[order].sum())
    return min(ones, params.k - ones)


def is_limited(point, reference: Dataset, params: LimitedSetParams) -> bool:
    """True when the minority-class count among the k nearest neighbors exceeds rho*k."""
    minority = _neighborhood_minority(point.id, np.asarray(point.x, dtype=float), reference, params)
    return minority > params.rho * params.k


def limited_report(test: Dataset, reference: Dataset, params: LimitedSetParams) -> LimitedSetReport:
    members = [p.id for p in test if is_limited(p, reference, params)]
    fraction = len(members) / len(test) if len(test) else 0.0
    return LimitedSetReport(tuple(members), fraction, params)


def limited_fraction(test: Dataset, reference: Dataset, params: LimitedSetParams) -> float:
    """Fraction of test points that are limited, in [0, 1]."""
    return limited_report(test, reference, params).fraction
