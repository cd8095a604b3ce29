"""Post-hoc hyperparameter selection on actively sampled training sets.

Every (C, gamma) candidate is scored by leave-one-out cross-validation on the
final training set; the best score wins, with ties broken toward smaller gamma
and then smaller C (simpler boundaries first). The weight-corrected variant
rescores only the fixed acquisition model, upweighting training points that
sit beyond their predicted class's median distance from that model's boundary;
this counters the sampling bias that crowds the labeled set near the boundary
and makes the fixed model's plain LOOCV look worse than it generalizes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .active import AcquisitionStrategy, ActiveRunRecord, LabelOracle, run_active_learning
from .data import Dataset, SeededRng, _readonly
from .errors import DataError, SolverError
from .svm import (
    DEFAULT_SETTINGS,
    ModelParams,
    SolverSettings,
    TrainedSvm,
    boundary_distances,
    fit_gram,
    predict_many,
    squared_distances,
    train_svc,
)

__all__ = [
    "ModelGrid",
    "LoocvScore",
    "WeightAssignment",
    "TieTrace",
    "SelectionReport",
    "loocv_accuracy",
    "weighted_loocv_accuracy",
    "grid_loocv",
    "select_best",
    "compute_cutoffs",
    "assign_weights",
    "weighted_score_for_fixed_model",
    "run_palms",
    "run_palms_fwc",
]


@dataclass(frozen=True)
class ModelGrid:
    """Ordered candidate set; the acquisition model must be a member."""

    models: tuple[ModelParams, ...]
    default_index: int

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        if not self.models:
            raise ValueError("model grid must not be empty")
        if not (0 <= self.default_index < len(self.models)):
            raise ValueError("default_index out of range")
        if len({(m.C, m.gamma) for m in self.models}) != len(self.models):
            raise ValueError("model grid contains duplicate (C, gamma) pairs")

    @property
    def default(self) -> ModelParams:
        return self.models[self.default_index]

    @classmethod
    def build(cls, c_values: Sequence[float], gamma_values: Sequence[float],
              default_c: float, default_gamma: float) -> "ModelGrid":
        models = tuple(ModelParams(C=float(c), gamma=float(g)) for c in c_values for g in gamma_values)
        try:
            idx = models.index(ModelParams(C=float(default_c), gamma=float(default_gamma)))
        except ValueError:
            raise ValueError("default model must lie on the grid") from None
        return cls(models, idx)


@dataclass(frozen=True)
class LoocvScore:
    """Per-model LOOCV outcome: aggregate accuracy plus the per-fold record."""

    model: ModelParams
    accuracy: float
    weighted: bool
    point_ids: tuple[int, ...]
    fold_correct: tuple[bool, ...]


@dataclass(frozen=True)
class WeightAssignment:
    """Two-valued sample weights from the fixed model's boundary distances.

    A point weighs ``w`` when its distance is at least its predicted class's
    median cutoff (true labels play no part), else 1.
    """

    point_ids: tuple[int, ...]
    weights: np.ndarray
    cutoff_class0: float
    cutoff_class1: float
    w: float

    def __post_init__(self):
        object.__setattr__(self, "point_ids", tuple(int(i) for i in self.point_ids))
        object.__setattr__(self, "weights", _readonly(np.asarray(self.weights, dtype=np.float64)))


@dataclass(frozen=True)
class TieTrace:
    """Models tied at the top accuracy (in tie-break order) and how the tie resolved."""

    tied: tuple[ModelParams, ...]
    resolved_by: str  # "unique" | "gamma" | "c"


@dataclass(frozen=True)
class SelectionReport:
    scores: tuple[LoocvScore, ...]
    chosen: ModelParams
    tie_trace: TieTrace
    method: str  # "palms" | "palms-fwc"
    weight_assignment: WeightAssignment | None = None


def _check_loocv_feasible(train: Dataset):
    if len(train) < 3:
        raise DataError(f"LOOCV needs at least 3 points, got {len(train)}")
    n0, n1 = train.class_counts()
    if min(n0, n1) < 2:
        raise DataError(
            f"LOOCV needs at least 2 points per class so every fold keeps both classes "
            f"(got {n0} of class 0, {n1} of class 1)"
        )


def _fold_correct(train: Dataset, model: ModelParams, settings: SolverSettings,
                  kernel: np.ndarray | None = None) -> np.ndarray:
    """Hold each point out, refit, and record whether it is predicted correctly."""
    n = len(train)
    y_pm = train.labels.astype(np.float64) * 2.0 - 1.0
    if kernel is None:
        kernel = np.exp(-model.gamma * squared_distances(train.features, train.features))
    correct = np.zeros(n, dtype=bool)
    for j in range(n):
        keep = np.ones(n, dtype=bool)
        keep[j] = False
        sub = np.ix_(keep, keep)
        try:
            alpha, bias, _ = fit_gram(kernel[sub], y_pm[keep], model.C, settings)
        except SolverError as exc:
            raise SolverError(
                f"fold {j} (held-out id {int(train.ids[j])}): {exc}", details=exc.details
            ) from exc
        f = kernel[j, keep] @ (alpha * y_pm[keep]) + bias
        correct[j] = (f > 0.0) == (train.labels[j] == 1)
    return correct


def loocv_accuracy(train: Dataset, model: ModelParams,
                   settings: SolverSettings = DEFAULT_SETTINGS) -> LoocvScore:
    """Plain leave-one-out accuracy of ``model`` on ``train``."""
    _check_loocv_feasible(train)
    correct = _fold_correct(train, model, settings)
    return LoocvScore(
        model=model,
        accuracy=float(correct.mean()),
        weighted=False,
        point_ids=tuple(int(i) for i in train.ids),
        fold_correct=tuple(bool(c) for c in correct),
    )


def _weights_aligned(score_ids: Sequence[int], weights: WeightAssignment) -> np.ndarray:
    by_id = dict(zip(weights.point_ids, weights.weights))
    try:
        return np.array([by_id[int(i)] for i in score_ids])
    except KeyError as missing:
        raise ValueError(f"weight assignment missing point id {missing}") from None


def weighted_loocv_accuracy(train: Dataset, model: ModelParams, weights: WeightAssignment,
                            settings: SolverSettings = DEFAULT_SETTINGS) -> LoocvScore:
    """LOOCV accuracy with per-point weights: sum(w * correct) / sum(w).

    The weights come from the full training set's fixed model and are not
    recomputed inside folds.
    """
    _check_loocv_feasible(train)
    correct = _fold_correct(train, model, settings)
    w = _weights_aligned(train.ids, weights)
    return LoocvScore(
        model=model,
        accuracy=float(np.dot(w, correct.astype(np.float64)) / w.sum()),
        weighted=True,
        point_ids=tuple(int(i) for i in train.ids),
        fold_correct=tuple(bool(c) for c in correct),
    )


def weighted_score_for_fixed_model(score: LoocvScore, weights: WeightAssignment) -> LoocvScore:
    """Reaggregate an unweighted score's fold record under ``weights``."""
    w = _weights_aligned(score.point_ids, weights)
    correct = np.array(score.fold_correct, dtype=np.float64)
    return LoocvScore(
        model=score.model,
        accuracy=float(np.dot(w, correct) / w.sum()),
        weighted=True,
        point_ids=score.point_ids,
        fold_correct=score.fold_correct,
    )


def grid_loocv(train: Dataset, grid: ModelGrid,
               settings: SolverSettings = DEFAULT_SETTINGS) -> tuple[LoocvScore, ...]:
    """Unweighted LOOCV for every grid model; kernel matrices shared across equal gammas."""
    _check_loocv_feasible(train)
    d2 = squared_distances(train.features, train.features)
    kernels: dict[float, np.ndarray] = {}
    ids = tuple(int(i) for i in train.ids)
    scores = []
    for model in grid.models:
        if model.gamma not in kernels:
            kernels[model.gamma] = np.exp(-model.gamma * d2)
        correct = _fold_correct(train, model, settings, kernel=kernels[model.gamma])
        scores.append(
            LoocvScore(model, float(correct.mean()), False, ids, tuple(bool(c) for c in correct))
        )
    return tuple(scores)


def select_best(scores: Sequence[LoocvScore], grid: ModelGrid) -> tuple[ModelParams, TieTrace]:
    """Highest accuracy wins; ties resolve to smaller gamma, then smaller C."""
    by_params = {(s.model.C, s.model.gamma): s for s in scores}
    if len(by_params) != len(scores):
        raise ValueError("duplicate models in scores")
    if set(by_params) != {(m.C, m.gamma) for m in grid.models}:
        raise ValueError("scores must cover the model grid exactly")
    best_acc = max(s.accuracy for s in scores)
    tied = sorted((s.model for s in scores if s.accuracy == best_acc),
                  key=lambda m: (m.gamma, m.C))
    if len(tied) == 1:
        resolved = "unique"
    elif sum(1 for m in tied if m.gamma == tied[0].gamma) == 1:
        resolved = "gamma"
    else:
        resolved = "c"
    return tied[0], TieTrace(tuple(tied), resolved)


def compute_cutoffs(fixed_model: TrainedSvm, train: Dataset) -> tuple[float, float]:
    """Median boundary distance per predicted class; an empty class yields +inf."""
    d = boundary_distances(fixed_model, train.features)
    predicted = predict_many(fixed_model, train.features)
    cutoffs = []
    for cls in (0, 1):
        cls_d = d[predicted == cls]
        cutoffs.append(float(np.median(cls_d)) if len(cls_d) else np.inf)
    return cutoffs[0], cutoffs[1]


def assign_weights(fixed_model: TrainedSvm, train: Dataset, cutoffs: tuple[float, float],
                   w: float) -> WeightAssignment:
    """Weight w for points at or beyond their predicted class's cutoff, else 1."""
    if w < 1.0:
        raise ValueError(f"weight must be >= 1, got {w}")
    d = boundary_distances(fixed_model, train.features)
    predicted = predict_many(fixed_model, train.features)
    per_class = np.array(cutoffs)
    weights = np.where(d >= per_class[predicted], w, 1.0)
    return WeightAssignment(
        point_ids=tuple(int(i) for i in train.ids),
        weights=weights,
        cutoff_class0=cutoffs[0],
        cutoff_class1=cutoffs[1],
        w=w,
    )


def run_palms(
    init: Dataset,
    pool: Dataset,
    fixed: ModelParams,
    budget: int,
    grid: ModelGrid,
    oracle: LabelOracle,
    settings: SolverSettings = DEFAULT_SETTINGS,
    rng: SeededRng | None = None,
) -> tuple[SelectionReport, ActiveRunRecord, TrainedSvm]:
    """Margin-based active learning with the fixed model, then LOOCV selection."""
    if grid.default != fixed:
        raise ValueError(f"grid default {grid.default} must equal the fixed model {fixed}")
    record = run_active_learning(init, pool, fixed, budget, AcquisitionStrategy.MARGIN,
                                 oracle, settings, rng)
    training = record.final_training_set
    scores = grid_loocv(training, grid, settings)
    chosen, trace = select_best(scores, grid)
    report = SelectionReport(scores=scores, chosen=chosen, tie_trace=trace, method="palms")
    return report, record, train_svc(training, chosen, settings)


def run_palms_fwc(
    init: Dataset,
    pool: Dataset,
    fixed: ModelParams,
    budget: int,
    grid: ModelGrid,
    w: float,
    oracle: LabelOracle,
    settings: SolverSettings = DEFAULT_SETTINGS,
    rng: SeededRng | None = None,
) -> tuple[SelectionReport, ActiveRunRecord, TrainedSvm]:
    """Like :func:`run_palms`, but the fixed model is scored by weighted LOOCV.

    Weights are computed once from the fixed model trained on the final
    training set; all other grid models keep their plain LOOCV scores. With
    w = 1 the selection is identical to :func:`run_palms`.
    """
    if grid.default != fixed:
        raise ValueError(f"grid default {grid.default} must equal the fixed model {fixed}")
    record = run_active_learning(init, pool, fixed, budget, AcquisitionStrategy.MARGIN,
                                 oracle, settings, rng)
    training = record.final_training_set
    fixed_trained = train_svc(training, fixed, settings)
    cutoffs = compute_cutoffs(fixed_trained, training)
    assignment = assign_weights(fixed_trained, training, cutoffs, w)
    plain = grid_loocv(training, grid, settings)
    scores = tuple(
        weighted_score_for_fixed_model(s, assignment) if i == grid.default_index else s
        for i, s in enumerate(plain)
    )
    chosen, trace = select_best(scores, grid)
    report = SelectionReport(scores=scores, chosen=chosen, tie_trace=trace,
                             method="palms-fwc", weight_assignment=assignment)
    return report, record, train_svc(training, chosen, settings)
