"""HTTP session service: create sessions, send messages, read workflows and
transcripts, list components, and run evaluations.

All responses are JSON; failures come back as {"code", "message"} with an
appropriate status. Sessions live in memory with an idle TTL; message handling
is serialized per session (queued by default, or rejected with a busy error).
"""

from __future__ import annotations

import os
import threading
import time
import uuid
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse

from .agents import EngineError, Session
from .config import ConfigError, DepsBuilder, ServiceConfig
from .evaluation.baselines import run_baseline_rag, run_baseline_single_llm
from .evaluation.dataset import DatasetError, load_dataset, sample_from_obj
from .evaluation.harness import run_workteam, score_predictions
from .registry import list_components
from .workflow import (
    TaskStep,
    Workflow,
    WorkflowError,
    validate_workflow,
    workflow_to_obj,
)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class _StoredSession:
    def __init__(self, session: Session):
        self.session = session
        self.lock = threading.Lock()
        self.last_access = time.time()


class SessionStore:
    def __init__(self, ttl: float):
        self.ttl = ttl
        self._sessions: dict[str, _StoredSession] = {}
        self._guard = threading.Lock()

    def put(self, session: Session) -> str:
        sid = uuid.uuid4().hex
        with self._guard:
            self._purge()
            self._sessions[sid] = _StoredSession(session)
        return sid

    def get(self, sid: str) -> _StoredSession:
        with self._guard:
            self._purge()
            stored = self._sessions.get(sid)
            if stored is None:
                raise ApiError(404, "unknown-session", f"no session {sid!r}")
            stored.last_access = time.time()
            return stored

    def _purge(self) -> None:
        cutoff = time.time() - self.ttl
        for sid in [s for s, st in self._sessions.items() if st.last_access < cutoff]:
            del self._sessions[sid]


def _workflow_from_body(data: Any, where: str) -> Workflow:
    if not isinstance(data, list):
        raise ApiError(400, "invalid-body", f"{where} must be a JSON array of steps")
    steps = []
    for i, obj in enumerate(data):
        if not isinstance(obj, dict) or "task" not in obj or set(obj) - {"task", "parameter"}:
            raise ApiError(400, "invalid-body", f"{where}[{i}] must be a {{task, parameter}} object")
        try:
            steps.append(TaskStep(obj["task"], obj.get("parameter", {})))
        except WorkflowError as exc:
            raise ApiError(400, "invalid-body", f"{where}[{i}]: {exc}") from exc
    return Workflow(tuple(steps))


def _require(body: Any, key: str, kind: type, where: str = "body"):
    if not isinstance(body, dict):
        raise ApiError(400, "invalid-body", f"{where} must be a JSON object")
    if key not in body:
        raise ApiError(400, "invalid-body", f"{where} is missing {key!r}")
    value = body[key]
    if not isinstance(value, kind):
        raise ApiError(400, "invalid-body", f"{key!r} must be of type {kind.__name__}")
    return value


def build_app(config: ServiceConfig, builder: Optional[DepsBuilder] = None) -> FastAPI:
    builder = builder or DepsBuilder(config)
    store = SessionStore(config.session_ttl)
    app = FastAPI(title="workteam", docs_url=None, redoc_url=None)
    auth_token = os.environ.get(config.auth_token_env, "") if config.auth_token_env else ""

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": exc.message}
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400, content={"code": "invalid-body", "message": str(exc)}
        )

    @app.middleware("http")
    async def _auth(request: Request, call_next):
        if auth_token:
            header = request.headers.get("authorization", "")
            if header != f"Bearer {auth_token}":
                return JSONResponse(
                    status_code=401,
                    content={"code": "unauthorized", "message": "missing or bad bearer token"},
                )
        return await call_next(request)

    def _locked(stored: _StoredSession):
        if config.busy_mode == "reject":
            if not stored.lock.acquire(blocking=False):
                raise ApiError(409, "busy", "session is handling another message")
        else:
            stored.lock.acquire()
        return stored.lock

    def _persist_transcript(sid: str, session: Session) -> None:
        if not config.transcript_dir:
            return
        directory = Path(config.transcript_dir)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / f"{sid}.jsonl").write_text(
            session.transcript.to_jsonl() + "\n", encoding="utf-8"
        )

    def _handle(sid: str, stored: _StoredSession, text: str) -> dict:
        lock = _locked(stored)
        try:
            result = stored.session.handle(text)
        except EngineError as exc:
            raise ApiError(
                500,
                "engine-failure",
                f"{exc} (transcript: /sessions/{sid}/transcript)",
            ) from exc
        finally:
            lock.release()
            _persist_transcript(sid, stored.session)
        workflow = result.workflow
        if workflow is not None:
            report = validate_workflow(workflow, builder.registry)
            if not report.ok:
                raise ApiError(500, "engine-failure", "session produced an invalid workflow")
        return {
            "reply": result.reply,
            "workflow": workflow_to_obj(workflow) if workflow is not None else None,
            "transcript_delta": [
                {"actor": e.actor, "kind": e.kind, "payload": e.payload, "seq": e.seq}
                for e in result.transcript_delta
            ],
        }

    @app.post("/sessions")
    async def create_session(request: Request):
        body = await request.json()
        instruction = _require(body, "instruction", str)
        extra = set(body) - {"instruction", "existing_workflow"}
        if extra:
            raise ApiError(400, "invalid-body", f"unknown fields {sorted(extra)}")
        existing = None
        if body.get("existing_workflow") is not None:
            existing = _workflow_from_body(body["existing_workflow"], "existing_workflow")
        try:
            session = Session(builder.deps(), existing_workflow=existing)
        except (ConfigError, EngineError) as exc:
            raise ApiError(400, "invalid-body", str(exc)) from exc
        sid = store.put(session)
        result = _handle(sid, store.get(sid), instruction)
        return {"session_id": sid, **result}

    @app.post("/sessions/{sid}/messages")
    async def post_message(sid: str, request: Request):
        body = await request.json()
        text = _require(body, "text", str)
        stored = store.get(sid)
        return _handle(sid, stored, text)

    @app.get("/sessions/{sid}/workflow")
    async def get_workflow(sid: str):
        stored = store.get(sid)
        workflow = stored.session.state.current_workflow
        if workflow is None:
            raise ApiError(404, "no-workflow", f"session {sid!r} has no workflow yet")
        return workflow_to_obj(workflow)

    @app.get("/sessions/{sid}/transcript")
    async def get_transcript(sid: str):
        stored = store.get(sid)
        text = stored.session.transcript.to_jsonl()
        return PlainTextResponse(text + ("\n" if text else ""), media_type="application/x-ndjson")

    @app.get("/components")
    async def get_components():
        return [
            {"name": c.name, "description": c.description}
            for c in list_components(builder.registry)
        ]

    @app.post("/evaluate")
    async def evaluate_endpoint(request: Request):
        body = await request.json()
        if not isinstance(body, dict):
            raise ApiError(400, "invalid-body", "body must be a JSON object")
        system = _require(body, "system", str)
        if system not in ("workteam", "single_llm", "rag"):
            raise ApiError(400, "invalid-body", f"unknown system {system!r}")
        options = body.get("options") or {}
        if not isinstance(options, dict):
            raise ApiError(400, "invalid-body", "options must be an object")
        try:
            if "dataset_path" in body:
                samples = load_dataset(body["dataset_path"], builder.registry)
            elif "samples" in body:
                raw = body["samples"]
                if not isinstance(raw, list):
                    raise ApiError(400, "invalid-body", "samples must be a list")
                samples = [sample_from_obj(obj, f"samples[{i}]") for i, obj in enumerate(raw)]
            else:
                raise ApiError(400, "invalid-body", "provide dataset_path or samples")
        except DatasetError as exc:
            raise ApiError(400, "invalid-body", str(exc)) from exc
        k = int(options.get("k", config.k))
        n_shots = int(options.get("n_shots", 3))
        try:
            if system == "workteam":
                preds = run_workteam(samples, builder.deps)
            elif system == "single_llm":
                llm = builder.baseline_backend(samples)
                preds = run_baseline_single_llm(samples, builder.registry, llm, n_shots)
            else:
                llm = builder.baseline_backend(samples)
                preds = run_baseline_rag(samples, builder.registry, builder.embedder, llm, k)
        except ConfigError as exc:
            raise ApiError(400, "invalid-body", str(exc)) from exc
        report = score_predictions(preds, samples)
        return report.to_obj()

    return app
