"""Session state machine: chat-scope persistence and per-turn scope resolution.

Chat-scope decorators persist across turns until cleared. Decorators declared
without ``+++ChatScope`` act on the current message only and shadow same-name
chat entries for that turn. ``+++Clear`` always operates on chat scope and is
applied during scope resolution, so a turn carrying Clear plus new decorators
starts from a clean slate.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from .errors import BothScopeMarkersError, SessionStoreError
from .registry import DecoratorKind, Registry, ValidatedDecorator
from .syntax import DiagnosticCode, ParseMode, scan_message

logger = logging.getLogger(__name__)

CHAT_SCOPE = "ChatScope"
MESSAGE_SCOPE = "MessageScope"
CLEAR = "Clear"


class Origin(str, Enum):
    CHAT = "chat"
    MESSAGE = "message"


@dataclass(frozen=True)
class EffectiveEntry:
    decorator: ValidatedDecorator
    origin: Origin


@dataclass(frozen=True)
class EffectiveSet:
    """Ordered, name-unique decorator set governing one turn."""

    entries: tuple[EffectiveEntry, ...] = ()

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def names(self) -> tuple[str, ...]:
        return tuple(e.decorator.name for e in self.entries)


@dataclass(frozen=True)
class TurnRecord:
    role: str
    raw: str
    body: str
    decorators: tuple[ValidatedDecorator, ...] = ()
    consumed_meta: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class SessionState:
    session_id: str = ""
    chat_scope: dict[str, ValidatedDecorator] = field(default_factory=dict)
    turn_counter: int = 0
    transcript: tuple[TurnRecord, ...] = ()

    @classmethod
    def fresh(cls, session_id: str = "") -> SessionState:
        return cls(session_id=session_id)


@dataclass(frozen=True)
class ScopeWarning:
    code: DiagnosticCode
    message: str
    decorator: str = ""


@dataclass(frozen=True)
class TurnResolution:
    state: SessionState
    effective: EffectiveSet
    meta_queue: tuple[ValidatedDecorator, ...]
    warnings: tuple[ScopeWarning, ...]


def _clear_scope(
    scope: dict[str, ValidatedDecorator], targets: tuple[str, ...]
) -> tuple[dict[str, ValidatedDecorator], tuple[ScopeWarning, ...]]:
    if not targets:
        return {}, ()
    warnings = []
    out = dict(scope)
    for target in targets:
        if target in out:
            del out[target]
        else:
            warnings.append(
                ScopeWarning(
                    DiagnosticCode.INACTIVE_CLEAR_TARGET,
                    f"clear target '{target}' is not active",
                    CLEAR,
                )
            )
    return out, tuple(warnings)


def resolve_turn(state: SessionState, decs: list[ValidatedDecorator]) -> TurnResolution:
    """Apply scope rules for one turn without touching the transcript.

    Clears run first (declaration order), then ChatScope upserts, then the
    effective set is computed: chat-origin entries in activation order,
    followed by message-origin entries, with message entries shadowing
    same-name chat entries. Meta decorators never enter the effective set.
    """
    marker_names = {d.name for d in decs if d.kind is DecoratorKind.SCOPE_MARKER}
    if CHAT_SCOPE in marker_names and MESSAGE_SCOPE in marker_names:
        raise BothScopeMarkersError()
    metas = tuple(d for d in decs if d.kind is DecoratorKind.META)
    directives = [d for d in decs if d.kind is DecoratorKind.DIRECTIVE]
    warnings: list[ScopeWarning] = []

    scope = dict(state.chat_scope)
    for meta in metas:
        if meta.name != CLEAR:
            continue
        scope, clear_warnings = _clear_scope(scope, meta.resolved_params.get("targets", ()))
        warnings.extend(clear_warnings)

    if CHAT_SCOPE in marker_names:
        if not directives:
            warnings.append(
                ScopeWarning(
                    DiagnosticCode.EMPTY_CHAT_SCOPE,
                    "ChatScope has no companion decorators to persist",
                    CHAT_SCOPE,
                )
            )
        for dec in directives:
            scope[dec.name] = dec  # replace keeps the original activation position
        entries = tuple(EffectiveEntry(dec, Origin.CHAT) for dec in scope.values())
    else:
        local: dict[str, ValidatedDecorator] = {}
        for dec in directives:
            local[dec.name] = dec
        chat_part = tuple(
            EffectiveEntry(dec, Origin.CHAT) for name, dec in scope.items() if name not in local
        )
        message_part = tuple(EffectiveEntry(dec, Origin.MESSAGE) for dec in local.values())
        entries = chat_part + message_part

    return TurnResolution(
        state=replace(state, chat_scope=scope),
        effective=EffectiveSet(entries),
        meta_queue=metas,
        warnings=tuple(warnings),
    )


def apply_turn(
    state: SessionState, decs: list[ValidatedDecorator]
) -> tuple[SessionState, EffectiveSet, tuple[ValidatedDecorator, ...]]:
    """Scope-resolution step: returns the updated state, the effective set,
    and the meta decorators queued for local execution."""
    resolution = resolve_turn(state, decs)
    return resolution.state, resolution.effective, resolution.meta_queue


def effective_set(state: SessionState, message_decs: list[ValidatedDecorator]) -> EffectiveSet:
    """Pure view of the effective set a turn would produce; no state change."""
    return resolve_turn(state, message_decs).effective


def clear(state: SessionState, targets: list[str] | tuple[str, ...] = ()) -> SessionState:
    """Remove the named chat-scope entries, or every entry when ``targets`` is empty."""
    scope, warnings = _clear_scope(state.chat_scope, tuple(targets))
    for warning in warnings:
        logger.warning(warning.message)
    return replace(state, chat_scope=scope)


def record_turn(state: SessionState, record: TurnRecord) -> SessionState:
    return replace(
        state,
        transcript=state.transcript + (record,),
        turn_counter=state.turn_counter + 1,
    )


def digest_output(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


# --- persistence ------------------------------------------------------------

def state_to_dict(state: SessionState) -> dict:
    return {
        "session_id": state.session_id,
        "chat_scope": [dec.render() for dec in state.chat_scope.values()],
        "turn_counter": state.turn_counter,
        "transcript": [
            {
                "role": record.role,
                "raw": record.raw,
                "body": record.body,
                "decorators": [dec.render() for dec in record.decorators],
                "consumed_meta": [
                    {"name": name, "digest": digest} for name, digest in record.consumed_meta
                ],
            }
            for record in state.transcript
        ],
    }


def _parse_rendered(rendered: str, registry: Registry) -> ValidatedDecorator:
    result = scan_message(rendered, ParseMode.STRICT)
    if len(result.invocations) != 1:
        raise SessionStoreError(f"expected one invocation, got {rendered!r}")
    return registry.validate(result.invocations[0])


def parse_chat_scope_entry(rendered: str, registry: Registry) -> ValidatedDecorator:
    dec = _parse_rendered(rendered, registry)
    if dec.kind is not DecoratorKind.DIRECTIVE:
        raise SessionStoreError(
            f"chat scope may only hold directive decorators, got {rendered!r}"
        )
    return dec


def state_from_dict(data: dict, registry: Registry) -> SessionState:
    try:
        chat_scope: dict[str, ValidatedDecorator] = {}
        for rendered in data["chat_scope"]:
            dec = parse_chat_scope_entry(rendered, registry)
            chat_scope[dec.name] = dec
        transcript = []
        for turn in data["transcript"]:
            transcript.append(
                TurnRecord(
                    role=turn["role"],
                    raw=turn["raw"],
                    body=turn["body"],
                    decorators=tuple(
                        _parse_rendered(rendered, registry) for rendered in turn["decorators"]
                    ),
                    consumed_meta=tuple(
                        (item["name"], item["digest"]) for item in turn.get("consumed_meta", [])
                    ),
                )
            )
        return SessionState(
            session_id=data["session_id"],
            chat_scope=chat_scope,
            turn_counter=int(data["turn_counter"]),
            transcript=tuple(transcript),
        )
    except (KeyError, TypeError) as exc:
        raise SessionStoreError(f"malformed session document: {exc}") from exc


def save_session(state: SessionState, path: str | Path) -> None:
    path = Path(path)
    payload = json.dumps(state_to_dict(state), indent=2, ensure_ascii=False) + "\n"
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(payload, encoding="utf-8")
    tmp.replace(path)


def load_session(path: str | Path, registry: Registry) -> SessionState:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SessionStoreError(f"session file {path} is not valid JSON: {exc}") from exc
    return state_from_dict(data, registry)


_SAFE_ID_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*$")


class SessionStore:
    """Directory of session files with per-session atomic read-modify-write.

    One store serves one process; turns for the same session id serialize on
    an in-process lock. Distinct sessions proceed in parallel.
    """

    def __init__(self, directory: str | Path, registry: Registry):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.registry = registry
        self._locks: dict[str, threading.Lock] = {}
        self._master = threading.Lock()

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._master:
            return self._locks.setdefault(session_id, threading.Lock())

    def path_for(self, session_id: str) -> Path:
        if _SAFE_ID_RE.fullmatch(session_id) and len(session_id) <= 120:
            name = session_id
        else:
            name = "id-" + hashlib.sha256(session_id.encode("utf-8")).hexdigest()[:16]
        return self.directory / f"{name}.json"

    def exists(self, session_id: str) -> bool:
        return self.path_for(session_id).is_file()

    def load(self, session_id: str) -> SessionState:
        path = self.path_for(session_id)
        if not path.is_file():
            return SessionState.fresh(session_id)
        return load_session(path, self.registry)

    def save(self, state: SessionState) -> None:
        save_session(state, self.path_for(state.session_id))

    def update(self, session_id: str, fn):
        """Run ``fn(state) -> (new_state, result)`` atomically for the session."""
        with self._lock_for(session_id):
            state = self.load(session_id)
            new_state, result = fn(state)
            self.save(new_state)
            return result
