from __future__ import annotations

import json
from datetime import datetime, timezone

import httpx
import pytest

import promptdec as p

# the composition exercised throughout: persistent scope + three directives
PERSISTENCE_MESSAGE = (
    "+++ChatScope\n"
    "+++Reasoning\n"
    "+++Tone(style=formal)\n"
    "+++OutputFormat(format=markdown)\n"
    "\n"
    "Assess the ethical implications of AI-driven recruitment systems."
)

INTRO_MESSAGE = (
    "+++Reasoning\n"
    "+++Debate\n"
    "\n"
    "Explain the implications of using facial recognition in public spaces."
)


@pytest.fixture
def registry() -> p.Registry:
    return p.default_registry()


@pytest.fixture
def clock() -> p.FixedClock:
    return p.FixedClock(datetime(2026, 3, 14, 9, 26, 53, tzinfo=timezone.utc))


@pytest.fixture
def engine(registry, clock) -> p.Engine:
    return p.Engine(registry=registry, clock=clock)


@pytest.fixture
def lenient_engine(registry, clock) -> p.Engine:
    return p.Engine(registry=registry, mode="lenient", clock=clock)


class StubUpstream:
    """Counting chat-completions stub; records every forwarded request body."""

    def __init__(self):
        self.requests: list[httpx.Request] = []

    @property
    def call_count(self) -> int:
        return len(self.requests)

    @property
    def last_body(self) -> bytes:
        return self.requests[-1].content

    def last_json(self) -> dict:
        return json.loads(self.last_body)

    def handler(self, request: httpx.Request) -> httpx.Response:
        self.requests.append(request)
        return httpx.Response(
            200,
            json={
                "id": "stub-1",
                "object": "chat.completion",
                "model": "stub-model",
                "choices": [
                    {
                        "index": 0,
                        "message": {"role": "assistant", "content": "stub answer"},
                        "finish_reason": "stop",
                    }
                ],
            },
        )

    def transport(self) -> httpx.MockTransport:
        return httpx.MockTransport(self.handler)


@pytest.fixture
def gateway_factory(tmp_path, clock):
    """Build a (client, upstream, config) triple against a stub upstream."""
    from fastapi.testclient import TestClient

    created = []

    def make(**overrides):
        upstream = StubUpstream()
        store_dir = tmp_path / f"sessions-{len(created)}"
        settings = {
            "upstream_url": "http://upstream.test/v1",
            "session_store": str(store_dir),
            "audit_log": str(tmp_path / f"audit-{len(created)}.jsonl"),
            "sanitizer": True,
        }
        settings.update(overrides)
        config = p.GatewayConfig(**settings)
        app = p.create_app(config, clock=clock, transport=upstream.transport())
        client = TestClient(app)
        client.__enter__()
        created.append(client)
        return client, upstream, config

    yield make
    for client in created:
        client.__exit__(None, None, None)
