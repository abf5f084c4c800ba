"""Chat-completions-compatible HTTP proxy around the decorator engine.

Only the last user message of a request is ever parsed for decorators; every
other message is untrusted content and, when the sanitizer is on, has any
line-leading ``+++`` defanged to ``+ + +`` before forwarding. Pure-meta turns
are answered locally without calling the upstream API.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass
from datetime import timezone
from pathlib import Path
from typing import Any
from urllib.parse import urlsplit

import httpx
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response, StreamingResponse
from starlette.background import BackgroundTask

from . import meta as meta_ops
from .compiler import CompiledPrompt, Engine
from .errors import (
    BothScopeMarkersError,
    ConfigError,
    MessageParseError,
    SessionStoreError,
    UnknownDecoratorError,
    ValidationError,
)
from .meta import Clock, SystemClock
from .registry import Registry, default_registry
from .scope import SessionState, SessionStore
from .syntax import ParseMode

logger = logging.getLogger(__name__)

SESSION_HEADER = "X-Decorator-Session"
APPLIED_HEADER = "x-decorators-applied"
LOCAL_MODEL = "decorator-engine/local"

_CONFIG_FIELDS = {
    "listen",
    "upstream_url",
    "credential_env",
    "parse_mode",
    "injection",
    "sanitizer",
    "session_store",
    "audit_log",
    "extensions",
}


@dataclass(frozen=True)
class GatewayConfig:
    upstream_url: str
    listen: str = "127.0.0.1:8787"
    credential_env: str = ""
    parse_mode: str = "strict"
    injection: str = "system-message"
    sanitizer: bool = True
    session_store: str = "sessions"
    audit_log: str = "audit.jsonl"
    extensions: tuple[str, ...] = ()

    def __post_init__(self):
        parts = urlsplit(self.upstream_url)
        if parts.scheme not in ("http", "https") or not parts.netloc:
            raise ConfigError(f"upstream_url must be an absolute http(s) URL, got {self.upstream_url!r}")
        if self.parse_mode not in ("strict", "lenient"):
            raise ConfigError(f"parse_mode must be strict or lenient, got {self.parse_mode!r}")
        if self.injection not in ("system-message", "user-prefix"):
            raise ConfigError(
                f"injection must be system-message or user-prefix, got {self.injection!r}"
            )
        if ":" not in self.listen:
            raise ConfigError(f"listen must be host:port, got {self.listen!r}")

    @property
    def host(self) -> str:
        return self.listen.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        try:
            return int(self.listen.rsplit(":", 1)[1])
        except ValueError:
            raise ConfigError(f"listen port is not a number: {self.listen!r}") from None

    @classmethod
    def from_dict(cls, data: dict) -> GatewayConfig:
        unknown = set(data) - _CONFIG_FIELDS
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "upstream_url" not in data:
            raise ConfigError("config requires 'upstream_url'")
        kwargs = dict(data)
        kwargs["extensions"] = tuple(kwargs.get("extensions", ()))
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> GatewayConfig:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)


def sanitize_untrusted(text: str) -> tuple[str, int]:
    """Defang line-leading ``+++`` to ``+ + +``; everything else is untouched."""
    lines = text.split("\n")
    hits = 0
    out = []
    for line in lines:
        stripped = line.lstrip(" \t")
        if stripped.startswith("+++"):
            indent = line[: len(line) - len(stripped)]
            out.append(indent + "+ + +" + stripped[3:])
            hits += 1
        else:
            out.append(line)
    return "\n".join(out), hits


class AuditLog:
    """Append-only JSON Lines sink; a failed write never fails the request."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def append(self, record: dict) -> None:
        line = json.dumps(record, ensure_ascii=False)
        try:
            with self._lock, self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
        except OSError as exc:
            logger.error("audit append failed: %s", exc)


def _error_response(status: int, kind: str, message: str, **extra: Any) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"type": kind, "message": message, **extra}},
    )


def _local_response(compiled: CompiledPrompt, created: int) -> dict:
    content = "\n\n".join(text for _, text in compiled.meta_outputs)
    return {
        "id": f"local-{compiled.audit.turn_index}",
        "object": "chat.completion",
        "created": created,
        "model": LOCAL_MODEL,
        "choices": [
            {
                "index": 0,
                "message": {"role": "assistant", "content": content},
                "finish_reason": "stop",
            }
        ],
    }


def build_registry(config: GatewayConfig) -> Registry:
    registry = default_registry()
    for path in config.extensions:
        registry.load_extensions(Path(path))
    return registry


def create_app(
    config: GatewayConfig,
    registry: Registry | None = None,
    clock: Clock | None = None,
    transport: httpx.AsyncBaseTransport | None = None,
) -> FastAPI:
    """Build the proxy app; ``transport`` lets tests stub the upstream."""
    registry = registry or build_registry(config)
    clock = clock or SystemClock()
    engine = Engine(registry=registry, mode=ParseMode(config.parse_mode), clock=clock)
    store = SessionStore(config.session_store, registry)
    audit = AuditLog(config.audit_log)
    client = httpx.AsyncClient(transport=transport, timeout=60.0)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        await client.aclose()

    app = FastAPI(title="decorator-gateway", lifespan=lifespan)
    app.state.engine = engine
    app.state.store = store
    app.state.audit = audit
    app.state.config = config
    app.state.client = client

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok"}

    @app.get("/v1/sessions/{session_id}")
    async def show_session(session_id: str):
        if not store.exists(session_id):
            return _error_response(404, "unknown_session", f"no session '{session_id}'")
        state = store.load(session_id)
        doc = meta_ops.export(state, "json", clock=clock)
        return Response(content=doc.content, media_type="application/json")

    @app.post("/v1/chat/completions")
    async def chat_completions(request: Request):
        raw = await request.body()
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError:
            return _error_response(400, "invalid_request", "request body is not valid JSON")
        messages = payload.get("messages")
        if not isinstance(messages, list):
            return _error_response(400, "invalid_request", "request requires a messages array")
        session_id = request.headers.get(SESSION_HEADER, "")

        handler = _ChatHandler(app, payload, raw, messages, session_id, request)
        return await handler.run()

    return app


class _ChatHandler:
    """One request's worth of gateway work; keeps handle() readable."""

    def __init__(self, app, payload, raw, messages, session_id, request):
        self.app = app
        self.payload = payload
        self.raw = raw
        self.messages = messages
        self.session_id = session_id
        self.request = request
        self.engine: Engine = app.state.engine
        self.store: SessionStore = app.state.store
        self.audit: AuditLog = app.state.audit
        self.config: GatewayConfig = app.state.config
        self.client: httpx.AsyncClient = app.state.client
        self.sanitizer_hits = 0
        self.mutated = False

    def _last_user_index(self) -> int | None:
        for i in range(len(self.messages) - 1, -1, -1):
            msg = self.messages[i]
            if isinstance(msg, dict) and msg.get("role") == "user" and isinstance(msg.get("content"), str):
                return i
        return None

    def _sanitize_history(self, last_user: int | None) -> None:
        if not self.config.sanitizer:
            return
        for i, msg in enumerate(self.messages):
            if i == last_user or not isinstance(msg, dict):
                continue
            content = msg.get("content")
            if not isinstance(content, str):
                continue
            clean, hits = sanitize_untrusted(content)
            if hits:
                self.messages[i] = {**msg, "content": clean}
                self.sanitizer_hits += hits
                self.mutated = True

    def _compile(self, message_text: str) -> CompiledPrompt:
        if self.session_id:
            return self.store.update(
                self.session_id, lambda state: self.engine.compile_turn(state, message_text)
            )
        _, compiled = self.engine.compile_turn(SessionState.fresh(), message_text)
        return compiled

    def _audit_record(self, compiled: CompiledPrompt | None, upstream_called: bool, error: str = "") -> None:
        record: dict[str, Any] = {
            "session_id": self.session_id or None,
            "turn": compiled.audit.turn_index if compiled else None,
            "decorators": [],
            "conflict_notes": [],
            "meta": [],
            "upstream_called": upstream_called,
            "sanitizer_hits": self.sanitizer_hits,
        }
        if compiled:
            audit_dict = compiled.audit.as_dict()
            record["decorators"] = audit_dict["decorators"]
            record["conflict_notes"] = audit_dict["conflict_notes"]
            record["meta"] = audit_dict["meta"]
        if error:
            record["error"] = error
        self.audit.append(record)

    def _applied_names(self, compiled: CompiledPrompt | None) -> str:
        if not compiled:
            return ""
        return ",".join(d.name for d in compiled.audit.decorators)

    async def run(self):
        last_user = self._last_user_index()
        self._sanitize_history(last_user)

        compiled: CompiledPrompt | None = None
        if last_user is not None:
            try:
                compiled = self._compile(self.messages[last_user]["content"])
            except (MessageParseError, UnknownDecoratorError, ValidationError, BothScopeMarkersError) as exc:
                self._audit_record(None, upstream_called=False, error=str(exc))
                diagnostics = [
                    {"code": d.code.value, "message": d.message}
                    for d in getattr(exc, "diagnostics", [])
                ]
                return _error_response(400, "parse_error", str(exc), diagnostics=diagnostics)
            except SessionStoreError as exc:
                self._audit_record(None, upstream_called=False, error=str(exc))
                return _error_response(500, "session_store_failure", str(exc))

        if compiled is not None and compiled.local_only:
            now = self.engine.clock.now()
            if now.tzinfo is None:
                now = now.replace(tzinfo=timezone.utc)
            body = _local_response(compiled, int(now.timestamp()))
            self._audit_record(compiled, upstream_called=False)
            headers = {APPLIED_HEADER: self._applied_names(compiled)}
            return JSONResponse(content=body, headers=headers)

        outbound = self._build_outbound(compiled, last_user)
        return await self._forward(compiled, outbound)

    def _build_outbound(self, compiled: CompiledPrompt | None, last_user: int | None) -> bytes:
        if compiled is not None and last_user is not None:
            original = self.messages[last_user]
            rendered = compiled.directive_block.rendered
            new_content = compiled.body
            if rendered and self.config.injection == "user-prefix":
                new_content = rendered + "\n\n" + compiled.body
            if new_content != original.get("content"):
                self.mutated = True
            self.messages[last_user] = {**original, "content": new_content}
            if rendered and self.config.injection == "system-message":
                self.messages.insert(last_user, {"role": "system", "content": rendered})
                self.mutated = True
        if not self.mutated:
            return self.raw
        self.payload["messages"] = self.messages
        return json.dumps(self.payload, ensure_ascii=False).encode("utf-8")

    def _upstream_headers(self) -> dict[str, str]:
        headers = {"content-type": "application/json"}
        accept = self.request.headers.get("accept")
        if accept:
            headers["accept"] = accept
        credential = ""
        if self.config.credential_env:
            credential = os.environ.get(self.config.credential_env, "")
        if credential:
            headers["authorization"] = f"Bearer {credential}"
        elif self.request.headers.get("authorization"):
            headers["authorization"] = self.request.headers["authorization"]
        return headers

    async def _forward(self, compiled: CompiledPrompt | None, outbound: bytes):
        url = self.config.upstream_url.rstrip("/") + "/chat/completions"
        upstream_request = self.client.build_request(
            "POST", url, content=outbound, headers=self._upstream_headers()
        )
        try:
            upstream = await self.client.send(upstream_request, stream=True)
        except httpx.HTTPError as exc:
            self._audit_record(compiled, upstream_called=False, error=f"upstream unreachable: {exc}")
            return _error_response(502, "upstream_unreachable", str(exc))
        self._audit_record(compiled, upstream_called=True)
        headers = {APPLIED_HEADER: self._applied_names(compiled)}
        for passthrough in ("content-type", "content-encoding"):
            if passthrough in upstream.headers:
                headers[passthrough] = upstream.headers[passthrough]
        if upstream.is_stream_consumed:
            # preloaded response (stub transports); nothing left to stream
            return Response(
                content=upstream.content, status_code=upstream.status_code, headers=headers
            )
        return StreamingResponse(
            upstream.aiter_raw(),
            status_code=upstream.status_code,
            headers=headers,
            background=BackgroundTask(upstream.aclose),
        )
