"""Session-scoped HTTP API over the turn pipeline.

Sessions live in memory. Each holds one dialogue state plus a transcript;
turns within a session run strictly serially under a per-session lock, and a
failed turn commits nothing. Optionally every completed turn is appended to
a per-session JSONL transcript file.

Endpoints (JSON, UTF-8):
- POST   /api/sessions                 -> {"session_id", "greeting"}
- POST   /api/sessions/{id}/messages   body {"text"} -> TurnResult JSON
- GET    /api/sessions/{id}/state      -> state JSON
- DELETE /api/sessions/{id}            -> 204
- GET    /api/health                   -> {"status": "ok", "index_docs": int}
"""

from __future__ import annotations

import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from .engine import Engine, TURN_ERRORS, TurnResult
from .state import DialogueState, to_json_dict


class MessageIn(BaseModel):
    text: str


@dataclass
class Session:
    session_id: str
    state: DialogueState
    greeting: str
    created_at: float
    turns: list[tuple[str, TurnResult]] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def history(self, window_turns: int) -> list[tuple[str, str]]:
        """Recent (role, text) message pairs: greeting plus the last few turns."""
        messages: list[tuple[str, str]] = [("assistant", self.greeting)]
        for utterance, result in self.turns:
            messages.append(("user", utterance))
            messages.append(("assistant", result.response_text))
        return messages[-(2 * window_turns) :]


class SessionStore:
    """Thread-safe id -> Session map."""

    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, state: DialogueState, greeting: str) -> Session:
        session = Session(
            session_id=secrets.token_hex(16),
            state=state,
            greeting=greeting,
            created_at=time.time(),
        )
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            return self._sessions.get(session_id)

    def delete(self, session_id: str) -> bool:
        with self._lock:
            return self._sessions.pop(session_id, None) is not None


def _error(status: int, error_type: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"type": error_type, "message": message}})


def _unknown_session(session_id: str) -> JSONResponse:
    return _error(404, "unknown_session", f"no session with id {session_id!r}")


def create_app(engine: Engine, transcript_dir: Path | None = None, ui_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="convrec", docs_url=None, redoc_url=None)
    store = SessionStore()
    app.state.engine = engine
    app.state.sessions = store

    def persist_turn(session: Session, utterance: str, result: TurnResult) -> None:
        if transcript_dir is None:
            return
        transcript_dir.mkdir(parents=True, exist_ok=True)
        record = {"utterance": utterance, "result": result.to_json_dict()}
        path = transcript_dir / f"{session.session_id}.jsonl"
        with open(path, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "index_docs": engine.index.manifest.doc_count}

    @app.post("/api/sessions")
    def create_session():
        try:
            greeting = engine.greeting()
        except TURN_ERRORS as exc:
            return _error(502, type(exc).__name__, str(exc))
        session = store.create(engine.new_state(), greeting)
        return {"session_id": session.session_id, "greeting": greeting}

    @app.post("/api/sessions/{session_id}/messages")
    def post_message(session_id: str, message: MessageIn):
        session = store.get(session_id)
        if session is None:
            return _unknown_session(session_id)
        if not message.text or not message.text.strip():
            return _error(400, "empty_message", "message text must be non-empty")
        with session.lock:
            history = session.history(engine.history_window)
            try:
                new_state, result = engine.process_turn(session.state, history, message.text)
            except TURN_ERRORS as exc:
                return _error(502, type(exc).__name__, str(exc))
            # Commit only after full success: state and transcript move together.
            session.state = new_state
            session.turns.append((message.text.strip(), result))
            persist_turn(session, message.text.strip(), result)
        return result.to_json_dict()

    @app.get("/api/sessions/{session_id}/state")
    def get_state(session_id: str):
        session = store.get(session_id)
        if session is None:
            return _unknown_session(session_id)
        return to_json_dict(session.state)

    @app.delete("/api/sessions/{session_id}")
    def delete_session(session_id: str):
        if not store.delete(session_id):
            return _unknown_session(session_id)
        return Response(status_code=204)

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
