"""HTTP facade over the engine: sessions, queries, feedback, retraining.

All bodies are JSON; errors carry {code, message}. A feedback 2xx is sent
only after the record hit the log (the repository append fsyncs), and
session close schedules retraining in the background, swapping the engine
state atomically when done.
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Dict, Optional

from fastapi import BackgroundTasks, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .rank import (
    ApiNotListedError,
    Engine,
    Session,
    SessionClosedError,
    UnknownQueryIdError,
)


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class QueryBody(BaseModel):
    text: str


class FeedbackBody(BaseModel):
    query_id: str
    api_id: str


class SessionBox:
    """Session registry plus counters for /v1/stats."""

    def __init__(self):
        self._sessions: Dict[str, Session] = {}
        self._closed = 0
        self._lock = threading.Lock()

    def add(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.id] = session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise ServiceError(404, "unknown_session", f"no session {session_id!r}")
        return session

    def note_closed(self) -> None:
        with self._lock:
            self._closed += 1

    def counts(self) -> Dict[str, int]:
        with self._lock:
            open_count = sum(1 for s in self._sessions.values() if s.open)
            return {"sessions_open": open_count, "sessions_closed": self._closed}


def create_app(engine: Engine, ui_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="feedrank", version="0.1.0")
    box = SessionBox()
    app.state.engine = engine
    app.state.sessions = box

    @app.exception_handler(ServiceError)
    async def _service_error(_: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": exc.message}
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422, content={"code": "validation_error", "message": str(exc.errors())}
        )

    @app.get("/v1/health")
    def health():
        return {"status": "ok"}

    @app.get("/v1/stats")
    def stats():
        payload = engine.stats()
        payload.update(box.counts())
        return payload

    @app.post("/v1/sessions", status_code=201)
    def create_session():
        session = engine.open_session()
        box.add(session)
        return {"id": session.id, "created": session.created_ms}

    @app.post("/v1/sessions/{session_id}/queries")
    def post_query(session_id: str, body: QueryBody):
        session = box.get(session_id)
        if not body.text.strip():
            raise ServiceError(422, "empty_text", "query text must be non-empty")
        try:
            query_id, result = engine.handle_query(session, body.text)
        except SessionClosedError:
            raise ServiceError(409, "session_closed", f"session {session_id} is closed")
        cached = session.get(query_id)
        items = []
        for rank, item in enumerate(result.items, start=1):
            api = cached.rec_list.get(item.api_id).api
            items.append(
                {
                    "rank": rank,
                    "api_id": item.api_id,
                    "path": api.path,
                    "description": api.description,
                    "pred_score": item.pred_score,
                }
            )
        return {"query_id": query_id, "items": items}

    @app.post("/v1/sessions/{session_id}/feedback", status_code=204)
    def post_feedback(session_id: str, body: FeedbackBody):
        session = box.get(session_id)
        try:
            engine.record_feedback(session, body.query_id, body.api_id)
        except SessionClosedError:
            raise ServiceError(409, "session_closed", f"session {session_id} is closed")
        except UnknownQueryIdError:
            raise ServiceError(404, "unknown_query", f"no query {body.query_id!r} in session")
        except ApiNotListedError:
            raise ServiceError(422, "api_not_listed", f"api {body.api_id!r} was not shown")
        return None

    @app.delete("/v1/sessions/{session_id}", status_code=202)
    def close_session(session_id: str, background: BackgroundTasks):
        session = box.get(session_id)
        if not session.open:
            raise ServiceError(409, "session_closed", f"session {session_id} already closed")
        session.open = False
        box.note_closed()
        will_retrain = len(engine.repo) > 0
        if will_retrain:
            background.add_task(engine.retrain, session)
        return {
            "model_version": engine.model_version + (1 if will_retrain else 0),
            "retraining": will_retrain,
        }

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
