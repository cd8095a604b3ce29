"""Interactive labeling sessions: a human serves as the label oracle.

A session wraps one active-learning run. It bootstraps with uniformly random
queries until each class has enough labels for leave-one-out scoring, then
switches to margin-based acquisition; when the budget is exhausted (or the
labeler finishes early) the configured selection method runs on everything
labeled so far.

Sessions append every state-changing event to a log so a restarted service
can rebuild them; all recomputation is deterministic given the logged seed.
Uploaded pools may carry a label column; it is ignored — human answers are
authoritative.
"""

from __future__ import annotations

import csv
import io
import json
import secrets
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .active import acquire_next
from .data import Dataset, SeededRng, Standardizer, apply_standardizer, fit_standardizer
from .errors import DataError, SessionStateError
from .selection import (
    ModelGrid,
    SelectionReport,
    assign_weights,
    compute_cutoffs,
    grid_loocv,
    select_best,
    weighted_score_for_fixed_model,
)
from .svm import ModelParams, SolverSettings, decision_values, train_svc

__all__ = [
    "SessionConfig",
    "SessionState",
    "PoolPrediction",
    "SelectionOutcome",
    "Session",
    "SessionStore",
    "parse_pool_csv",
]


class SessionState(str, Enum):
    BOOTSTRAPPING = "bootstrapping"
    AWAITING_LABEL = "awaiting_label"
    READY = "ready"
    FINALIZED = "finalized"
    ABORTED = "aborted"


LIVE_STATES = {SessionState.BOOTSTRAPPING, SessionState.AWAITING_LABEL, SessionState.READY}


@dataclass(frozen=True)
class SessionConfig:
    """Labeling-session parameters; gamma values of None resolve to 1/n_features."""

    budget: int
    method: str = "palms"
    weight: float = 1.5
    seed: int | None = None
    bootstrap_per_class: int = 2
    fixed_c: float = 1.0
    fixed_gamma: float | None = None
    c_values: tuple[float, ...] = (0.01, 1.0, 100.0, 1e4)
    gamma_factors: tuple[float, ...] = (1e-4, 1e-2, 1.0, 1e2, 1e4)
    kkt_tolerance: float = 1e-3

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.method not in ("palms", "palms-fwc"):
            raise ValueError(f"method must be palms or palms-fwc, got {self.method!r}")
        if self.weight < 1.0:
            raise ValueError("weight must be >= 1")
        if self.bootstrap_per_class < 1:
            raise ValueError("bootstrap_per_class must be >= 1")
        object.__setattr__(self, "c_values", tuple(float(c) for c in self.c_values))
        object.__setattr__(self, "gamma_factors", tuple(float(g) for g in self.gamma_factors))

    def resolve_grid(self, n_features: int) -> tuple[ModelParams, ModelGrid]:
        inv_n = 1.0 / n_features
        fixed_gamma = self.fixed_gamma if self.fixed_gamma is not None else inv_n
        grid = ModelGrid.build(
            self.c_values,
            [f * inv_n for f in self.gamma_factors],
            default_c=self.fixed_c,
            default_gamma=fixed_gamma,
        )
        return grid.default, grid

    def solver_settings(self) -> SolverSettings:
        return SolverSettings(kkt_tolerance=self.kkt_tolerance)


@dataclass(frozen=True)
class PoolPrediction:
    point_id: int
    label: int
    decision_value: float


@dataclass(frozen=True)
class SelectionOutcome:
    report: SelectionReport
    training_ids: tuple[int, ...]
    predictions: tuple[PoolPrediction, ...]


def parse_pool_csv(text: str) -> np.ndarray:
    """Feature matrix from an uploaded pool CSV; a trailing 'label' column is dropped."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("pool CSV is empty, header row required") from None
    drop_last = header and header[-1] == "label"
    n_features = len(header) - (1 if drop_last else 0)
    if n_features < 1:
        raise DataError("pool CSV has no feature columns")
    rows = []
    for row_no, row in enumerate(reader):
        if len(row) != len(header):
            raise DataError(f"pool CSV row {row_no} has {len(row)} columns, expected {len(header)}")
        try:
            rows.append([float(v) for v in row[:n_features]])
        except ValueError:
            raise DataError(f"pool CSV row {row_no}: non-numeric feature value") from None
    features = np.asarray(rows, dtype=np.float64)
    if len(rows) == 0:
        raise DataError("pool CSV has no data rows")
    if not np.all(np.isfinite(features)):
        raise DataError("pool CSV contains non-finite feature values")
    return features


class Session:
    """One labeling run. Mutations are serialized by the per-session lock."""

    def __init__(self, session_id: str, config: SessionConfig, raw_features: np.ndarray, seed: int):
        self.id = session_id
        self.config = config
        self.seed = seed
        self.lock = threading.RLock()
        self.raw_features = raw_features
        pool_view = Dataset(np.arange(len(raw_features)), raw_features, np.zeros(len(raw_features), dtype=int))
        self.standardizer: Standardizer = fit_standardizer(pool_view)
        self.std_features = apply_standardizer(self.standardizer, pool_view).features
        self.fixed, self.grid = config.resolve_grid(raw_features.shape[1])
        self.settings = config.solver_settings()
        self._rng = SeededRng(seed)
        self.labels: dict[int, int] = {}
        self.label_order: list[int] = []
        self.state = SessionState.BOOTSTRAPPING
        self.pending: int | None = None
        self.outcome: SelectionOutcome | None = None
        self._advance()

    # -- views -------------------------------------------------------------

    @property
    def labels_used(self) -> int:
        return len(self.label_order)

    @property
    def remaining_budget(self) -> int:
        return self.config.budget - self.labels_used

    @property
    def phase(self) -> str:
        return "bootstrap" if not self._bootstrap_complete() else "margin"

    def unlabeled_ids(self) -> list[int]:
        return [i for i in range(len(self.raw_features)) if i not in self.labels]

    def progress(self) -> dict:
        return {
            "state": self.state.value,
            "phase": self.phase,
            "labels_used": self.labels_used,
            "budget": self.config.budget,
            "remaining_budget": self.remaining_budget,
            "pending_point_id": self.pending,
        }

    def next_query(self) -> dict:
        """The pending query; repeated calls return the same point."""
        with self.lock:
            if self.state is SessionState.FINALIZED:
                raise SessionStateError("session is finalized")
            if self.state not in (SessionState.BOOTSTRAPPING, SessionState.AWAITING_LABEL):
                raise SessionStateError(f"no pending query in state {self.state.value}")
            assert self.pending is not None
            return {
                "point_id": self.pending,
                "features": [float(v) for v in self.raw_features[self.pending]],
                "labels_used": self.labels_used,
                "budget": self.config.budget,
                "phase": self.phase,
            }

    # -- transitions ---------------------------------------------------------

    def _bootstrap_complete(self) -> bool:
        counts = [0, 0]
        for lab in self.labels.values():
            counts[lab] += 1
        return min(counts) >= self.config.bootstrap_per_class

    def _training_set(self) -> Dataset:
        ids = np.array(self.label_order, dtype=np.int64)
        return Dataset(ids, self.std_features[ids], np.array([self.labels[i] for i in self.label_order]))

    def _pool_view(self) -> Dataset:
        ids = np.array(self.unlabeled_ids(), dtype=np.int64)
        return Dataset(ids, self.std_features[ids], np.zeros(len(ids), dtype=int))

    def _advance(self):
        """Recompute state and pending query after a label (or at creation)."""
        remaining_pool = self.unlabeled_ids()
        if self.remaining_budget <= 0 or not remaining_pool:
            self.state = SessionState.READY
            self.pending = None
            return
        if not self._bootstrap_complete():
            self.state = SessionState.BOOTSTRAPPING
            self.pending = self._rng.pick_one(sorted(remaining_pool))
            return
        model = train_svc(self._training_set(), self.fixed, self.settings)
        self.state = SessionState.AWAITING_LABEL
        self.pending = acquire_next(model, self._pool_view())

    def submit_label(self, point_id: int, label: int) -> dict:
        """Accept the pending query's label, retrain, and move to the next query."""
        with self.lock:
            if self.state not in (SessionState.BOOTSTRAPPING, SessionState.AWAITING_LABEL):
                raise SessionStateError(f"cannot label in state {self.state.value}")
            if label not in (0, 1):
                raise ValueError(f"label must be 0 or 1, got {label}")
            if point_id != self.pending:
                raise SessionStateError(
                    f"label for point {point_id} rejected: pending query is {self.pending}",
                )
            self.labels[point_id] = int(label)
            self.label_order.append(point_id)
            self._advance()
            return self.progress()

    def can_finalize(self) -> bool:
        counts = [0, 0]
        for lab in self.labels.values():
            counts[lab] += 1
        return min(counts) >= 2

    def finalize(self) -> SelectionOutcome:
        """Run the configured selection method on everything labeled so far."""
        with self.lock:
            if self.state is SessionState.FINALIZED:
                assert self.outcome is not None
                return self.outcome
            if self.state not in (SessionState.READY, SessionState.AWAITING_LABEL):
                raise SessionStateError(f"cannot finalize in state {self.state.value}")
            if not self.can_finalize():
                raise SessionStateError(
                    "need at least 2 labels of each class for leave-one-out selection"
                )
            training = self._training_set()
            scores = grid_loocv(training, self.grid, self.settings)
            if self.config.method == "palms-fwc":
                fixed_trained = train_svc(training, self.fixed, self.settings)
                cutoffs = compute_cutoffs(fixed_trained, training)
                assignment = assign_weights(fixed_trained, training, cutoffs, self.config.weight)
                scores = tuple(
                    weighted_score_for_fixed_model(s, assignment) if i == self.grid.default_index else s
                    for i, s in enumerate(scores)
                )
            else:
                assignment = None
            chosen, trace = select_best(scores, self.grid)
            report = SelectionReport(tuple(scores), chosen, trace, self.config.method, assignment)
            final_model = train_svc(training, chosen, self.settings)
            f = decision_values(final_model, self.std_features)
            predictions = tuple(
                PoolPrediction(i, int(f[i] > 0.0), float(f[i])) for i in range(len(self.raw_features))
            )
            self.outcome = SelectionOutcome(report, tuple(self.label_order), predictions)
            self.state = SessionState.FINALIZED
            self.pending = None
            return self.outcome

    def abort(self):
        with self.lock:
            if self.state not in LIVE_STATES:
                raise SessionStateError(f"cannot abort in state {self.state.value}")
            self.state = SessionState.ABORTED
            self.pending = None


class SessionStore:
    """Owns sessions and the append-only event log; replays the log on startup."""

    def __init__(self, log_path=None, dataset_path=None):
        self.log_path = Path(log_path) if log_path else None
        self.dataset_path = dataset_path
        self.sessions: dict[str, Session] = {}
        self._log_lock = threading.Lock()
        if self.log_path and self.log_path.exists():
            self._replay()

    def _append(self, event: dict):
        if self.log_path is None:
            return
        with self._log_lock:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event) + "\n")
                fh.flush()

    def _server_pool_text(self) -> str:
        if not self.dataset_path:
            raise DataError("no server-side dataset configured")
        return Path(self.dataset_path).read_text(encoding="utf-8")

    def create(self, config: SessionConfig, pool_csv: str | None = None,
               use_server_dataset: bool = False) -> Session:
        if pool_csv is None and not use_server_dataset:
            raise DataError("a pool CSV or the server dataset reference is required")
        text = pool_csv if pool_csv is not None else self._server_pool_text()
        features = parse_pool_csv(text)
        seed = config.seed if config.seed is not None else secrets.randbits(63)
        session_id = secrets.token_urlsafe(16)
        session = Session(session_id, config, features, seed)
        self.sessions[session_id] = session
        self._append({
            "event": "created",
            "session": session_id,
            "seed": seed,
            "config": {
                "budget": config.budget,
                "method": config.method,
                "weight": config.weight,
                "seed": config.seed,
                "bootstrap_per_class": config.bootstrap_per_class,
                "fixed_c": config.fixed_c,
                "fixed_gamma": config.fixed_gamma,
                "c_values": list(config.c_values),
                "gamma_factors": list(config.gamma_factors),
                "kkt_tolerance": config.kkt_tolerance,
            },
            "pool_csv": pool_csv,
            "use_server_dataset": use_server_dataset,
        })
        self._append({"event": "queried", "session": session_id, "point_id": session.pending,
                      "phase": session.phase})
        return session

    def get(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise KeyError(f"unknown session {session_id!r}") from None

    def submit_label(self, session_id: str, point_id: int, label: int) -> dict:
        session = self.get(session_id)
        with session.lock:
            progress = session.submit_label(point_id, label)
            self._append({"event": "labeled", "session": session_id,
                          "point_id": point_id, "label": label})
            if session.pending is not None:
                self._append({"event": "queried", "session": session_id,
                              "point_id": session.pending, "phase": session.phase})
            return progress

    def finalize(self, session_id: str) -> SelectionOutcome:
        session = self.get(session_id)
        with session.lock:
            already = session.state is SessionState.FINALIZED
            outcome = session.finalize()
            if not already:
                self._append({"event": "finalized", "session": session_id})
            return outcome

    def abort(self, session_id: str):
        session = self.get(session_id)
        with session.lock:
            session.abort()
            self._append({"event": "aborted", "session": session_id})

    def _replay(self):
        for line in self.log_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            kind = event["event"]
            if kind == "created":
                cfg_raw = dict(event["config"])
                cfg_raw["c_values"] = tuple(cfg_raw["c_values"])
                cfg_raw["gamma_factors"] = tuple(cfg_raw["gamma_factors"])
                config = SessionConfig(**cfg_raw)
                text = event["pool_csv"] if event["pool_csv"] is not None else self._server_pool_text()
                session = Session(event["session"], config, parse_pool_csv(text), event["seed"])
                self.sessions[event["session"]] = session
            elif kind == "labeled":
                self.sessions[event["session"]].submit_label(event["point_id"], event["label"])
            elif kind == "finalized":
                self.sessions[event["session"]].finalize()
            elif kind == "aborted":
                self.sessions[event["session"]].abort()
            elif kind == "queried":
                continue  # informational; queries are recomputed deterministically
            else:
                raise ValueError(f"unknown event {kind!r} in session log")
