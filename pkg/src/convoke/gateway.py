"""HTTP + WebSocket service boundary.

Every request and response body carries `protocol_version`; mismatches are
rejected up front. Outcomes and trace steps stream over one WebSocket per
connection as versioned envelopes with per-session sequence numbers, so a
reconnecting client can pass `since=<last seq>` and rebuild without
duplicates. Sessions are fully isolated: one lock and one envelope log each.

Localhost binds need no credentials; anything else requires the token from
CONVOKE_GATEWAY_TOKEN (enforced by the CLI at startup and per-request here).
"""

from __future__ import annotations

import asyncio
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from fastapi import Body, FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from . import PROTOCOL_VERSION
from .core import TimedToken, canonical_json
from .endpointing import SilenceAdvance, StreamEvent
from .errors import (
    ConvokeError,
    InvalidScope,
    NotFound,
    SessionCreationError,
    StreamOrderViolation,
)
from .orchestrator import Session, SessionConfig

_STREAM_POLL_SECONDS = 0.02


@dataclass
class _SessionHandle:
    session: Session
    lock: threading.Lock = field(default_factory=threading.Lock)


class _ApiError(Exception):
    def __init__(self, status: int, code: str, message: str,**extra: Any):
        self.status = status
        self.body = {
            "protocol_version": PROTOCOL_VERSION,
            "error": {"code": code, "message": message, **extra},
        }
        super().__init__(message)


def _check_version(body: Mapping[str, Any]) -> None:
    version = body.get("protocol_version")
    if version != PROTOCOL_VERSION:
        raise _ApiError(
            400,
            "protocol-version-mismatch",
            f"protocol_version must be {PROTOCOL_VERSION}, got {version!r}",
            field="protocol_version",
        )


def _parse_events(raw_events: Any) -> list[StreamEvent]:
    if not isinstance(raw_events, list) or not raw_events:
        raise _ApiError(400, "invalid-events", "events must be a non-empty list", field="events")
    events: list[StreamEvent] = []
    for i, raw in enumerate(raw_events):
        kind = raw.get("kind") if isinstance(raw, Mapping) else None
        try:
            if kind == "token":
                events.append(
                    TimedToken(
                        surface=str(raw["surface"]),
                        start_ms=int(raw["start_ms"]),
                        end_ms=int(raw["end_ms"]),
                        language_tag=str(raw.get("language_tag", "unknown")),
                    )
                )
            elif kind == "silence":
                events.append(SilenceAdvance(int(raw["delta_ms"])))
            else:
                raise _ApiError(
                    400, "invalid-events", f"events[{i}].kind must be token or silence", field=f"events[{i}]"
                )
        except (KeyError, ValueError, TypeError, ConvokeError) as exc:
            raise _ApiError(400, "invalid-events", f"events[{i}]: {exc}", field=f"events[{i}]")
    return events


def create_app(
    default_config_path: str | Path | None = None,
    auth_token: str | None = None,
) -> FastAPI:
    app = FastAPI(title="convoke gateway", version="0.1.0")
    sessions: dict[str, _SessionHandle] = {}
    counter = {"value": 0}
    registry_lock = threading.Lock()

    def _authorized(request: Request) -> bool:
        if auth_token is None:
            return True
        header = request.headers.get("authorization", "")
        return header == f"Bearer {auth_token}"

    def _handle(session_id: str) -> _SessionHandle:
        handle = sessions.get(session_id)
        if handle is None:
            raise _ApiError(404, "not-found", f"unknown session {session_id!r}")
        return handle

    @app.exception_handler(_ApiError)
    async def _api_error_handler(_request: Request, exc: _ApiError) -> JSONResponse:
        return JSONResponse(status_code=exc.status, content=exc.body)

    @app.middleware("http")
    async def _auth_middleware(request: Request, call_next):
        if not _authorized(request):
            return JSONResponse(
                status_code=401,
                content={
                    "protocol_version": PROTOCOL_VERSION,
                    "error": {"code": "unauthorized", "message": "missing or wrong bearer token"},
                },
            )
        return await call_next(request)

    @app.get("/v1/protocol")
    def protocol() -> dict[str, Any]:
        return {"protocol_version": PROTOCOL_VERSION}

    @app.post("/v1/sessions")
    def create_session_endpoint(body: dict = Body(...)) -> dict[str, Any]:
        _check_version(body)
        config_data = body.get("config")
        base_dir = Path(str(body.get("base_dir", ".")))
        try:
            if config_data is not None:
                config = SessionConfig.from_dict(config_data, base_dir=base_dir)
            elif default_config_path is not None:
                config = SessionConfig.from_file(default_config_path)
            else:
                raise _ApiError(400, "invalid-config", "no config supplied", field="config")
            session = Session(config)
        except SessionCreationError as exc:
            raise _ApiError(
                400,
                "invalid-config",
                str(exc),
                field=exc.failing_file or "config",
            )
        with registry_lock:
            counter["value"] += 1
            session_id = f"s-{counter['value']:04d}"
            sessions[session_id] = _SessionHandle(session=session)
        return {"protocol_version": PROTOCOL_VERSION, "session_id": session_id}

    @app.post("/v1/sessions/{session_id}/events")
    def submit_turn_endpoint(session_id: str, body: dict = Body(...)) -> dict[str, Any]:
        _check_version(body)
        handle = _handle(session_id)
        events = _parse_events(body.get("events"))
        with handle.lock:
            try:
                outcomes = handle.session.submit_events(events)
            except StreamOrderViolation as exc:
                raise _ApiError(400, "stream-order", str(exc), field="events")
        return {
            "protocol_version": PROTOCOL_VERSION,
            "accepted": len(events),
            "turns_completed": [o.turn_index for o in outcomes],
        }

    @app.post("/v1/sessions/{session_id}/consent")
    def consent_endpoint(session_id: str, body: dict = Body(...)) -> dict[str, Any]:
        _check_version(body)
        handle = _handle(session_id)
        scope = str(body.get("scope", ""))
        action = str(body.get("action", ""))
        with handle.lock:
            try:
                effective_from = handle.session.update_consent(scope, action)
            except InvalidScope as exc:
                raise _ApiError(400, "invalid-scope", str(exc), field="scope")
        return {
            "protocol_version": PROTOCOL_VERSION,
            "scope": scope,
            "action": action,
            "effective_from_turn": effective_from,
        }

    @app.get("/v1/sessions/{session_id}/scopes")
    def scopes_endpoint(session_id: str) -> dict[str, Any]:
        handle = _handle(session_id)
        with handle.lock:
            scopes = handle.session.consent_scopes()
        return {"protocol_version": PROTOCOL_VERSION, "scopes": scopes}

    @app.get("/v1/sessions/{session_id}/state")
    def state_endpoint(session_id: str) -> dict[str, Any]:
        handle = _handle(session_id)
        with handle.lock:
            snapshot = handle.session.state_snapshot()
        return {"protocol_version": PROTOCOL_VERSION, "state": snapshot}

    @app.get("/v1/sessions/{session_id}/metrics")
    def metrics_endpoint(session_id: str) -> dict[str, Any]:
        handle = _handle(session_id)
        with handle.lock:
            metrics = handle.session.live_metrics()
        return {"protocol_version": PROTOCOL_VERSION, "metrics": metrics}

    @app.get("/v1/sessions/{session_id}/trace/{turn_index}")
    def trace_endpoint(session_id: str, turn_index: int) -> dict[str, Any]:
        handle = _handle(session_id)
        with handle.lock:
            try:
                trace = handle.session.get_trace(turn_index)
            except NotFound as exc:
                raise _ApiError(404, "not-found", str(exc))
        return {"protocol_version": PROTOCOL_VERSION, "trace": trace.to_dict()}

    @app.websocket("/v1/sessions/{session_id}/stream")
    async def stream_endpoint(websocket: WebSocket, session_id: str) -> None:
        await websocket.accept()
        params = websocket.query_params
        if auth_token is not None and params.get("token") != auth_token:
            await websocket.send_text(
                canonical_json(
                    {
                        "protocol_version": PROTOCOL_VERSION,
                        "kind": "error",
                        "seq": 0,
                        "body": {"code": "unauthorized", "message": "bad token"},
                    }
                )
            )
            await websocket.close(code=4401)
            return
        try:
            client_version = int(params.get("version", "0"))
        except ValueError:
            client_version = 0
        if client_version != PROTOCOL_VERSION:
            await websocket.send_text(
                canonical_json(
                    {
                        "protocol_version": PROTOCOL_VERSION,
                        "kind": "error",
                        "seq": 0,
                        "body": {
                            "code": "protocol-version-mismatch",
                            "message": f"server speaks protocol {PROTOCOL_VERSION}",
                        },
                    }
                )
            )
            await websocket.close(code=4400)
            return
        handle = sessions.get(session_id)
        if handle is None:
            await websocket.send_text(
                canonical_json(
                    {
                        "protocol_version": PROTOCOL_VERSION,
                        "kind": "error",
                        "seq": 0,
                        "body": {"code": "not-found", "message": f"unknown session {session_id!r}"},
                    }
                )
            )
            await websocket.close(code=4404)
            return
        try:
            cursor = int(params.get("since", "0"))
        except ValueError:
            cursor = 0
        try:
            while True:
                with handle.lock:
                    fresh = list(handle.session.envelopes[cursor:])
                if fresh:
                    for envelope in fresh:
                        await websocket.send_text(
                            canonical_json(
                                {"protocol_version": PROTOCOL_VERSION, **envelope}
                            )
                        )
                    cursor += len(fresh)
                else:
                    await asyncio.sleep(_STREAM_POLL_SECONDS)
        except WebSocketDisconnect:
            return

    return app
