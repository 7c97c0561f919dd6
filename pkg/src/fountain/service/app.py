"""HTTP facade over the assistant, versioned under /api/v1.

Errors use the envelope {"error": {"code": ..., "message": ..., "details": ...}}.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ..errors import FountainError
from ..linking import DeviationRequest
from .schemas import (
    ChainOut,
    DeviationIn,
    DeviationOut,
    FeedbackIn,
    FeedbackOut,
    FeedbackStatsOut,
    RiskTextIn,
    RiskTextOut,
    UserStatsOut,
)
from .state import AppState, ServiceConfig

_STATUS_BY_CODE = {
    "part_not_found": 404,
    "unknown_node": 404,
    "unknown_deviation": 404,
    "not_a_failure_mode": 404,
    "ambiguous_part": 409,
    "ingest_in_progress": 409,
    "provider_unavailable": 503,
    "io_error": 500,
    "internal_error": 500,
}


def _envelope(code: str, message: str, details=None) -> dict:
    return {"error": {"code": code, "message": message, "details": details or {}}}


def create_app(state: AppState) -> FastAPI:
    app = FastAPI(title="fountain", version="0.1.0")
    app.state.fountain = state
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(FountainError)
    async def fountain_error_handler(_request: Request, exc: FountainError):
        status = _STATUS_BY_CODE.get(exc.code, 400)
        return JSONResponse(status_code=status, content=_envelope(exc.code, exc.message, exc.details))

    @app.exception_handler(RequestValidationError)
    async def validation_handler(_request: Request, exc: RequestValidationError):
        errors = [
            {"loc": [str(part) for part in e.get("loc", ())], "msg": str(e.get("msg", "")), "type": str(e.get("type", ""))}
            for e in exc.errors()
        ]
        return JSONResponse(
            status_code=400,
            content=_envelope("malformed_body", "request body failed validation", {"errors": errors}),
        )

    @app.exception_handler(ValueError)
    async def value_error_handler(_request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content=_envelope("bad_request", str(exc)))

    @app.get("/api/v1/health")
    def health() -> dict:
        return {
            "status": "ok",
            "nodes": state.graph.node_count(),
            "edges": state.graph.edge_count(),
        }

    @app.post("/api/v1/deviations", response_model=DeviationOut, status_code=201)
    def create_deviation(body: DeviationIn) -> DeviationOut:
        request = DeviationRequest(
            part_ref=body.part_ref,
            requested_deviation=body.requested_deviation,
            current_definition=body.current_definition,
        )
        return DeviationOut.from_result(state.recommend(request))

    @app.get("/api/v1/failures/{failure_id}/explanation", response_model=ChainOut)
    def explanation(failure_id: int, deviation: Optional[int] = None) -> ChainOut:
        return ChainOut.from_chain(state.explanation(failure_id, deviation))

    @app.post("/api/v1/feedback", response_model=FeedbackOut, status_code=201)
    def feedback(body: FeedbackIn) -> FeedbackOut:
        feedback_id = state.record_feedback(
            deviation_id=body.deviation_id,
            item_ref=body.item_ref,
            verdict=body.verdict,
            selected=body.selected,
            justification=body.justification,
            user_ref=body.user_ref,
        )
        return FeedbackOut(feedback_id=feedback_id)

    @app.post("/api/v1/risk-text", response_model=RiskTextOut)
    def risk_text(body: RiskTextIn) -> RiskTextOut:
        return RiskTextOut(
            text=state.risk_text(body.deviation_id, body.failure_id, body.justification)
        )

    @app.post("/api/v1/admin/ingest/{kind}")
    async def ingest(kind: str, request: Request, allow_orphans: bool = False) -> dict:
        body = (await request.body()).decode("utf-8")
        return state.ingest_csv(kind, body, allow_orphans=allow_orphans)

    @app.post("/api/v1/admin/snapshot")
    def snapshot() -> dict:
        return state.snapshot()

    @app.get("/api/v1/stats/feedback", response_model=FeedbackStatsOut)
    def feedback_stats() -> FeedbackStatsOut:
        summary = state.feedback_stats()
        return FeedbackStatsOut(
            users={
                key: UserStatsOut(
                    deviations_evaluated=row.deviations_evaluated,
                    all_useful=row.all_useful,
                    mixed=row.mixed,
                    none_useful=row.none_useful,
                    incomplete=row.incomplete,
                )
                for key, row in summary.users.items()
            },
            useful_items=summary.useful_items,
            not_useful_items=summary.not_useful_items,
        )

    return app


def app_from_config(config: ServiceConfig) -> FastAPI:
    return create_app(AppState(config))
