"""HTTP+JSON API over labeling sessions.

POST /sessions                  create (201) from config + pool
GET  /sessions/{id}             status and progress
GET  /sessions/{id}/query       pending query (404 once finalized)
POST /sessions/{id}/label       submit the pending query's label (409 on mismatch)
POST /sessions/{id}/finalize    run selection, return the outcome
GET  /sessions/{id}/outcome     cached outcome (404 before finalize)

Errors carry {"code", "message"}.
"""

from __future__ import annotations

from typing import Literal

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .errors import DataError, SessionStateError, SolverError
from .selection import SelectionReport
from .service import SelectionOutcome, SessionConfig, SessionState, SessionStore

__all__ = ["create_app", "outcome_to_json", "report_to_json"]


class CreateSessionRequest(BaseModel):
    budget: int = Field(ge=1)
    method: Literal["palms", "palms-fwc"] = "palms"
    weight: float = 1.5
    seed: int | None = None
    bootstrap_per_class: int = 2
    fixed_c: float = 1.0
    fixed_gamma: float | None = None
    c_values: list[float] | None = None
    gamma_factors: list[float] | None = None
    pool_csv: str | None = None
    use_server_dataset: bool = False


class LabelRequest(BaseModel):
    point_id: int
    label: Literal[0, 1]


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


def report_to_json(report: SelectionReport) -> dict:
    doc = {
        "method": report.method,
        "chosen": {"C": report.chosen.C, "gamma": report.chosen.gamma},
        "scores": [
            {
                "model": {"C": s.model.C, "gamma": s.model.gamma},
                "accuracy": s.accuracy,
                "weighted": s.weighted,
                "point_ids": list(s.point_ids),
                "fold_correct": list(s.fold_correct),
            }
            for s in report.scores
        ],
        "tie_trace": {
            "tied": [{"C": m.C, "gamma": m.gamma} for m in report.tie_trace.tied],
            "resolved_by": report.tie_trace.resolved_by,
        },
        "weight_assignment": None,
    }
    if report.weight_assignment is not None:
        wa = report.weight_assignment
        doc["weight_assignment"] = {
            "w": wa.w,
            "cutoff_class0": wa.cutoff_class0,
            "cutoff_class1": wa.cutoff_class1,
            "point_ids": list(wa.point_ids),
            "weights": [float(v) for v in wa.weights],
        }
    return doc


def outcome_to_json(outcome: SelectionOutcome) -> dict:
    return {
        "report": report_to_json(outcome.report),
        "training_ids": list(outcome.training_ids),
        "predictions": [
            {"point_id": p.point_id, "label": p.label, "decision_value": p.decision_value}
            for p in outcome.predictions
        ],
    }


def create_app(dataset_path=None, log_path=None, store: SessionStore | None = None) -> FastAPI:
    app = FastAPI(title="palms labeling service")
    if store is None:
        store = SessionStore(log_path=log_path, dataset_path=dataset_path)
    app.state.store = store

    @app.exception_handler(DataError)
    async def data_error(_, exc):
        return _error(400, "bad_pool", str(exc))

    @app.exception_handler(ValueError)
    async def value_error(_, exc):
        return _error(400, "invalid_request", str(exc))

    @app.exception_handler(SolverError)
    async def solver_error(_, exc):
        return _error(500, "solver_failure", str(exc))

    @app.exception_handler(KeyError)
    async def unknown_session(_, exc):
        return _error(404, "unknown_session", str(exc.args[0]) if exc.args else "unknown session")

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        kwargs = dict(
            budget=req.budget,
            method=req.method,
            weight=req.weight,
            seed=req.seed,
            bootstrap_per_class=req.bootstrap_per_class,
            fixed_c=req.fixed_c,
            fixed_gamma=req.fixed_gamma,
        )
        if req.c_values is not None:
            kwargs["c_values"] = tuple(req.c_values)
        if req.gamma_factors is not None:
            kwargs["gamma_factors"] = tuple(req.gamma_factors)
        config = SessionConfig(**kwargs)
        session = store.create(config, pool_csv=req.pool_csv, use_server_dataset=req.use_server_dataset)
        return {"session_id": session.id}

    @app.get("/sessions/{session_id}")
    def session_status(session_id: str):
        return store.get(session_id).progress()

    @app.get("/sessions/{session_id}/query")
    def pending_query(session_id: str):
        session = store.get(session_id)
        if session.state is SessionState.FINALIZED:
            return _error(404, "finalized", "session is finalized; fetch /outcome instead")
        try:
            return session.next_query()
        except SessionStateError as exc:
            return _error(409, "no_pending_query", str(exc))

    @app.post("/sessions/{session_id}/label")
    def submit_label(session_id: str, req: LabelRequest):
        try:
            return store.submit_label(session_id, req.point_id, req.label)
        except SessionStateError as exc:
            code = "point_mismatch" if "pending query" in str(exc) else "invalid_state"
            return _error(409, code, str(exc))

    @app.post("/sessions/{session_id}/finalize")
    def finalize(session_id: str):
        try:
            return outcome_to_json(store.finalize(session_id))
        except SessionStateError as exc:
            return _error(409, "cannot_finalize", str(exc))

    @app.get("/sessions/{session_id}/outcome")
    def outcome(session_id: str):
        session = store.get(session_id)
        if session.outcome is None:
            return _error(404, "not_finalized", "session has no outcome yet")
        return outcome_to_json(session.outcome)

    return app
