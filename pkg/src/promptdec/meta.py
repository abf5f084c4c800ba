"""Local execution of introspection decorators: ActiveDecs, AvailableDecs, Export.

These never reach the upstream model; the engine answers them itself so state
reports cannot be hallucinated. Export timestamps come from an injectable
clock so outputs can be pinned in tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Protocol

from .errors import SessionStoreError
from .registry import Registry
from .scope import SessionState, TurnRecord

NO_ACTIVE_DECORATORS = "No active decorators."


class Clock(Protocol):
    def now(self) -> datetime: ...


class SystemClock:
    def now(self) -> datetime:
        return datetime.now(timezone.utc)


@dataclass(frozen=True)
class FixedClock:
    instant: datetime

    def now(self) -> datetime:
        return self.instant


def rfc3339(moment: datetime) -> str:
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    return moment.astimezone(timezone.utc).isoformat()


@dataclass(frozen=True)
class ExportDocument:
    format: str
    content: str
    included: tuple[str, ...] = ("transcript", "chat_scope", "decorator_metadata")


def active_decs(state: SessionState) -> str:
    """Chat-scope entries in activation order, one canonical line each."""
    if not state.chat_scope:
        return NO_ACTIVE_DECORATORS
    return "\n".join(dec.render() for dec in state.chat_scope.values())


def available_decs(state: SessionState, registry: Registry) -> str:
    """Markdown table of the full catalog with per-decorator activation status."""
    lines = ["| Name | Description | Status |", "| --- | --- | --- |"]
    for definition in registry.catalog():
        status = "Active" if definition.canonical_name in state.chat_scope else "Inactive"
        lines.append(f"| {definition.canonical_name} | {definition.description} | {status} |")
    return "\n".join(lines)


def _consumed_meta_strings(record: TurnRecord) -> list[str]:
    return [f"{name}:{digest}" for name, digest in record.consumed_meta]


def export(state: SessionState, format: str = "markdown", clock: Clock | None = None) -> ExportDocument:
    """Deterministic session dump in text, markdown, or json form."""
    clock = clock or SystemClock()
    stamp = rfc3339(clock.now())
    if format == "json":
        content = _export_json(state, stamp)
    elif format == "markdown":
        content = _export_markdown(state, stamp)
    elif format == "text":
        content = _export_text(state, stamp)
    else:
        raise ValueError(f"unsupported export format '{format}'")
    return ExportDocument(format=format, content=content)


def export_dict(state: SessionState, stamp: str) -> dict:
    return {
        "session_id": state.session_id,
        "chat_scope": [dec.render() for dec in state.chat_scope.values()],
        "turns": [
            {
                "role": record.role,
                "body": record.body,
                "decorators": [dec.render() for dec in record.decorators],
                "consumed_meta": _consumed_meta_strings(record),
            }
            for record in state.transcript
        ],
        "exported_at": stamp,
    }


def _export_json(state: SessionState, stamp: str) -> str:
    return json.dumps(export_dict(state, stamp), indent=2, ensure_ascii=False)


def _export_markdown(state: SessionState, stamp: str) -> str:
    lines = [
        "# Session Export",
        "",
        f"- Session: `{state.session_id or '(stateless)'}`",
        f"- Exported: {stamp}",
        f"- Turns: {len(state.transcript)}",
        "",
        "## Chat Scope",
        "",
    ]
    if state.chat_scope:
        lines.extend(f"- `{dec.render()}`" for dec in state.chat_scope.values())
    else:
        lines.append("_No active decorators._")
    lines.extend(["", "## Transcript", ""])
    for i, record in enumerate(state.transcript, start=1):
        lines.append(f"### Turn {i} ({record.role})")
        lines.append("")
        if record.decorators:
            rendered = ", ".join(f"`{dec.render()}`" for dec in record.decorators)
            lines.append(f"Decorators: {rendered}")
            lines.append("")
        if record.consumed_meta:
            consumed = ", ".join(f"`{item}`" for item in _consumed_meta_strings(record))
            lines.append(f"Consumed meta: {consumed}")
            lines.append("")
        if record.body:
            lines.append(record.body)
            lines.append("")
    return "\n".join(lines).rstrip("\n") + "\n"


def _export_text(state: SessionState, stamp: str) -> str:
    lines = [f"Session: {state.session_id or '(stateless)'}", f"Exported: {stamp}"]
    if state.chat_scope:
        lines.append("Chat scope:")
        lines.extend(f"  {dec.render()}" for dec in state.chat_scope.values())
    else:
        lines.append("Chat scope: none")
    lines.append("Transcript:")
    for i, record in enumerate(state.transcript, start=1):
        lines.append(f"--- turn {i} ({record.role}) ---")
        if record.decorators:
            lines.append("decorators: " + ", ".join(dec.render() for dec in record.decorators))
        if record.consumed_meta:
            lines.append("consumed meta: " + ", ".join(_consumed_meta_strings(record)))
        if record.body:
            lines.append(record.body)
    return "\n".join(lines) + "\n"


def import_export_document(data: dict, registry: Registry) -> SessionState:
    """Rebuild a session from the JSON export schema."""
    from .scope import _parse_rendered, parse_chat_scope_entry

    try:
        chat_scope = {}
        for rendered in data["chat_scope"]:
            dec = parse_chat_scope_entry(rendered, registry)
            chat_scope[dec.name] = dec
        transcript = []
        for turn in data["turns"]:
            decorators = tuple(_parse_rendered(r, registry) for r in turn["decorators"])
            body = turn["body"]
            head = "\n".join(dec.render() for dec in decorators)
            if head and body:
                raw = head + "\n\n" + body
            else:
                raw = head or body
            consumed = []
            for item in turn.get("consumed_meta", []):
                name, _, digest = item.rpartition(":")
                consumed.append((name, digest))
            transcript.append(
                TurnRecord(
                    role=turn["role"],
                    raw=raw,
                    body=body,
                    decorators=decorators,
                    consumed_meta=tuple(consumed),
                )
            )
        return SessionState(
            session_id=data["session_id"],
            chat_scope=chat_scope,
            turn_counter=len(transcript),
            transcript=tuple(transcript),
        )
    except (KeyError, TypeError) as exc:
        raise SessionStoreError(f"malformed export document: {exc}") from exc
