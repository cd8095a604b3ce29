"""Pool-based active learning: query the pool point nearest the decision boundary.

A run keeps two id-disjoint sets, training T and pool P. Each margin-strategy
iteration retrains the fixed model on T, moves the argmin-|f| pool point into
T with the oracle's label, and repeats until the budget (or pool) runs out.
The uniform-random strategy draws its whole sample up front instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Protocol

import numpy as np

from .data import Dataset, SeededRng
from .errors import DataError, OracleError
from .svm import DEFAULT_SETTINGS, ModelParams, SolverSettings, TrainedSvm, boundary_distances, train_svc

__all__ = [
    "LabelOracle",
    "SimulatedOracle",
    "AcquisitionStrategy",
    "QueryRecord",
    "ActiveRunRecord",
    "acquire_next",
    "run_active_learning",
]


class LabelOracle(Protocol):
    """Answers label requests by point id; answers must be stable within a run."""

    def label_for(self, point_id: int) -> int: ...


class SimulatedOracle:
    """Reads back the held-out true labels of a source dataset."""

    def __init__(self, truth: Dataset):
        self._labels = {int(i): int(y) for i, y in zip(truth.ids, truth.labels)}

    def label_for(self, point_id: int) -> int:
        return self._labels[point_id]


class ScriptedOracle:
    """Replays a fixed id -> label mapping (used to reproduce recorded sessions)."""

    def __init__(self, answers: dict[int, int]):
        self._answers = dict(answers)

    def label_for(self, point_id: int) -> int:
        return self._answers[point_id]


class AcquisitionStrategy(Enum):
    MARGIN = "margin"
    RANDOM = "random"


@dataclass(frozen=True)
class QueryRecord:
    """One query: step index, chosen point, |f| at query time (None for random), label."""

    step: int
    point_id: int
    distance: float | None
    label: int


@dataclass(frozen=True)
class ActiveRunRecord:
    initial: Dataset
    queries: tuple[QueryRecord, ...]
    final_training_set: Dataset
    fixed_model: ModelParams

    def __post_init__(self):
        if len(self.final_training_set) != len(self.initial) + len(self.queries):
            raise ValueError("final training set size must equal initial size plus query count")


def acquire_next(model: TrainedSvm, pool: Dataset) -> int:
    """Id of the pool point with the smallest |f|; ties go to the smallest id."""
    if len(pool) == 0:
        raise DataError("cannot acquire from an empty pool")
    d = boundary_distances(model, pool.features)
    best = np.lexsort((pool.ids, d))[0]
    return int(pool.ids[best])


def _labeled_singleton(pool: Dataset, point_id: int, label: int) -> Dataset:
    pos = int(np.flatnonzero(pool.ids == point_id)[0])
    return Dataset(pool.ids[pos : pos + 1], pool.features[pos : pos + 1], np.array([label]))


def run_active_learning(
    init: Dataset,
    pool: Dataset,
    fixed: ModelParams,
    budget: int,
    strategy: AcquisitionStrategy,
    oracle: LabelOracle,
    settings: SolverSettings = DEFAULT_SETTINGS,
    rng: SeededRng | None = None,
    observer: Callable[[int, TrainedSvm], None] | None = None,
) -> ActiveRunRecord:
    """Run min(budget, |pool|) query-label-(re)train iterations and record them.

    For the margin strategy, ``observer(step, model)`` is invoked with the
    model trained on T just before each acquisition (step 0 sees the model on
    the initial set). Oracle failures raise :class:`OracleError` carrying the
    partial record.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    if strategy is AcquisitionStrategy.RANDOM and rng is None:
        raise ValueError("random strategy requires an rng")
    n_queries = min(budget, len(pool))
    training = init
    remaining = pool
    queries: list[QueryRecord] = []

    def ask(point_id: int, step: int, distance: float | None):
        nonlocal training, remaining
        try:
            label = int(oracle.label_for(point_id))
        except Exception as exc:
            partial = ActiveRunRecord(init, tuple(queries), training, fixed)
            raise OracleError(f"oracle failed for point {point_id}: {exc}", partial) from exc
        queries.append(QueryRecord(step, point_id, distance, label))
        training = training.concat(_labeled_singleton(remaining, point_id, label))
        remaining = remaining.drop_ids([point_id])

    if strategy is AcquisitionStrategy.MARGIN:
        for step in range(n_queries):
            model = train_svc(training, fixed, settings)
            if observer is not None:
                observer(step, model)
            chosen = acquire_next(model, remaining)
            pos = int(np.flatnonzero(remaining.ids == chosen)[0])
            dist = float(boundary_distances(model, remaining.features[pos : pos + 1])[0])
            ask(chosen, step, dist)
    else:
        drawn = rng.sample_without_replacement([int(i) for i in remaining.ids], n_queries)
        for step, chosen in enumerate(drawn):
            ask(chosen, step, None)

    return ActiveRunRecord(init, tuple(queries), training, fixed)
