"""HTTP wiring: a FastAPI app around one EvaluationService.

Error mapping: unknown session -> 404; quota, protocol, and session-state
violations -> 409; malformed input -> 422 (both pydantic validation and
the package's own InputError).
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ..errors import (
    InputError,
    ProtocolError,
    QuotaError,
    SessionNotFoundError,
    SessionStateError,
)
from .core import EvaluationService, load_questionnaire
from .schemas import (
    AnnotationRequest,
    CreateSessionRequest,
    HealthView,
    MessageRequest,
    QuestionnaireView,
    SessionView,
    TranscriptListView,
)


def create_app(service: EvaluationService) -> FastAPI:
    app = FastAPI(title="dialogsearch evaluation service", version="0.1.0")
    # the browser client is served from elsewhere (file:// or a dev server)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    questionnaire = load_questionnaire()

    def _error(status: int):
        def handler(request: Request, exc: Exception) -> JSONResponse:
            return JSONResponse(status_code=status, content={"detail": str(exc)})

        return handler

    app.add_exception_handler(SessionNotFoundError, _error(404))
    app.add_exception_handler(QuotaError, _error(409))
    app.add_exception_handler(SessionStateError, _error(409))
    app.add_exception_handler(ProtocolError, _error(409))
    app.add_exception_handler(InputError, _error(422))

    @app.post("/sessions", response_model=SessionView)
    def create_session(body: CreateSessionRequest):
        return service.create_session(body.annotator_id).view()

    @app.get("/sessions/{session_id}", response_model=SessionView)
    def get_session(session_id: str):
        return service.get_session(session_id).view()

    @app.post("/sessions/{session_id}/messages", response_model=SessionView)
    def post_message(session_id: str, body: MessageRequest):
        return service.post_message(session_id, body.text).view()

    @app.post("/sessions/{session_id}/finish", response_model=SessionView)
    def finish(session_id: str):
        return service.finish(session_id).view()

    @app.post("/sessions/{session_id}/annotation")
    def submit_annotation(session_id: str, body: AnnotationRequest):
        return service.submit_annotation(
            session_id, body.overall, body.good_pairs, body.bad_pairs
        )

    @app.get("/questionnaire", response_model=QuestionnaireView)
    def get_questionnaire():
        return questionnaire

    @app.get("/transcripts", response_model=TranscriptListView)
    def list_transcripts():
        return {"records": service.transcripts()}

    @app.get("/health", response_model=HealthView)
    def health():
        return {"status": "ok"}

    return app
