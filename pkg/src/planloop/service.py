"""HTTP face of the loop. Sessions live in process memory; each one
wraps a private clone of a bundled world.

Routes:
  POST   /sessions                create a session
  GET    /sessions/{id}           full status snapshot
  POST   /sessions/{id}/message   one user turn, returns new events
  DELETE /sessions/{id}           drop the session
  GET    /worlds                  bundled world names
  WS     /sessions/{id}/events    replay then live event stream

Events are the orchestrator's sequence-numbered dicts. The socket
replays everything after the client's ``after`` cursor, then polls for
fresh events, so reconnecting clients never miss or duplicate one.
"""

from __future__ import annotations

import asyncio
import threading
import uuid

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel, Field

from .backends import RemoteBackend, RemoteConfig, RuleBackend
from .orchestrator import Session, SessionStateError
from .world import bundled_world_path, load_world

BUNDLED_WORLDS = ("apartment", "apartment_xl")

_POLL_SECONDS = 0.05


class CreateSessionRequest(BaseModel):
    world: str = "apartment"
    backend: str = "rule"
    remote_url: str | None = None
    parse_mode: str = "lenient"
    max_recovery_rounds: int = Field(default=2, ge=0, le=10)
    time_out: float = Field(default=120.0, gt=0)


class MessageRequest(BaseModel):
    text: str


class SessionHandle:
    def __init__(self, session: Session):
        self.session = session
        self.lock = threading.Lock()


def create_app() -> FastAPI:
    app = FastAPI(title="plan loop service")
    sessions: dict[str, SessionHandle] = {}

    def get_handle(session_id: str) -> SessionHandle:
        handle = sessions.get(session_id)
        if handle is None:
            raise HTTPException(status_code=404, detail="no such session")
        return handle

    @app.get("/worlds")
    def worlds() -> dict:
        return {"worlds": list(BUNDLED_WORLDS)}

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest) -> dict:
        if req.world not in BUNDLED_WORLDS:
            raise HTTPException(status_code=400, detail=f"unknown world {req.world!r}")
        world = load_world(bundled_world_path(req.world))
        if req.backend == "rule":
            containers = frozenset(
                n for n, loc in world.locations.items() if loc.container
            )
            backend = RuleBackend(world.vocabulary(), containers)
        elif req.backend == "remote":
            try:
                config = RemoteConfig.load(endpoint=req.remote_url)
            except ValueError:
                raise HTTPException(
                    status_code=400, detail="remote backend needs remote_url"
                )
            backend = RemoteBackend.from_config(config)
        else:
            raise HTTPException(
                status_code=400, detail=f"unknown backend {req.backend!r}"
            )
        session = Session(
            world,
            backend,
            parse_mode=req.parse_mode,
            max_recovery_rounds=req.max_recovery_rounds,
            time_out=req.time_out,
        )
        session_id = uuid.uuid4().hex[:12]
        sessions[session_id] = SessionHandle(session)
        return {"id": session_id, "state": session.state}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        handle = get_handle(session_id)
        with handle.lock:
            return {"id": session_id, **handle.session.status()}

    @app.post("/sessions/{session_id}/message")
    def post_message(session_id: str, req: MessageRequest) -> dict:
        handle = get_handle(session_id)
        if not req.text.strip():
            raise HTTPException(status_code=400, detail="text must be non-empty")
        with handle.lock:
            session = handle.session
            first_new = len(session.events)
            try:
                session.handle_user(req.text)
            except SessionStateError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            return {
                "id": session_id,
                "state": session.state,
                "events": session.events[first_new:],
            }

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str) -> None:
        get_handle(session_id)
        del sessions[session_id]

    @app.websocket("/sessions/{session_id}/events")
    async def event_stream(ws: WebSocket, session_id: str, after: int = -1):
        handle = sessions.get(session_id)
        if handle is None:
            await ws.close(code=4404)
            return
        await ws.accept()
        cursor = after + 1
        try:
            while True:
                events = handle.session.events
                while cursor < len(events):
                    await ws.send_json(events[cursor])
                    cursor += 1
                await asyncio.sleep(_POLL_SECONDS)
        except WebSocketDisconnect:
            return

    return app


app = create_app()
