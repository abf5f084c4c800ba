"""Directive compilation: stage planning, conflict resolution, block synthesis.

The effective set is ordered into pipeline stages, conflict rules adapt
individual sections (never silently dropping anything), and each decorator
contributes one labeled section to the directive block injected ahead of the
user's body text. Compilation is deterministic: no timestamps, no randomness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import meta as meta_ops
from .errors import (
    HardConflictError,
    TemplateInstantiationError,
    UnknownDecoratorError,
    ValidationError,
)
from .meta import Clock, SystemClock
from .registry import DecoratorKind, PipelineStage, Registry, ValidatedDecorator, default_registry
from .scope import (
    EffectiveSet,
    Origin,
    SessionState,
    TurnRecord,
    digest_output,
    record_turn,
    resolve_turn,
)
from .syntax import ParseMode, scan_message

STRUCTURED_FORMATS = frozenset({"json", "yaml", "xml"})


@dataclass(frozen=True)
class PlannedDecorator:
    decorator: ValidatedDecorator
    stage: PipelineStage
    structured: bool = False

    @property
    def name(self) -> str:
        return self.decorator.name


@dataclass(frozen=True)
class ConflictNote:
    decorator: str
    trigger: str
    detail: str


@dataclass(frozen=True)
class Section:
    stage: PipelineStage
    name: str
    text: str


@dataclass(frozen=True)
class DirectiveBlock:
    sections: tuple[Section, ...] = ()
    header: str = ""

    @property
    def rendered(self) -> str:
        if not self.sections:
            return ""
        parts = [f"[decorator: {section.name}]\n{section.text}" for section in self.sections]
        body = "\n\n".join(parts)
        return f"{self.header}\n\n{body}" if self.header else body


@dataclass(frozen=True)
class DecoratorAudit:
    name: str
    origin: str
    stage: int


@dataclass(frozen=True)
class AuditMetadata:
    session_id: str
    turn_index: int
    decorators: tuple[DecoratorAudit, ...] = ()
    conflict_notes: tuple[ConflictNote, ...] = ()
    meta_consumed: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "turn": self.turn_index,
            "decorators": [
                {"name": d.name, "origin": d.origin, "stage": d.stage} for d in self.decorators
            ],
            "conflict_notes": [
                {"decorator": n.decorator, "trigger": n.trigger, "detail": n.detail}
                for n in self.conflict_notes
            ],
            "meta": list(self.meta_consumed),
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class CompiledPrompt:
    directive_block: DirectiveBlock
    body: str
    meta_outputs: tuple[tuple[str, str], ...] = ()
    audit: AuditMetadata = field(default=AuditMetadata("", 0))
    local_only: bool = False


def plan(effective: EffectiveSet) -> list[PlannedDecorator]:
    """Tag each effective decorator with its stage, ordered by (stage, position)."""
    tagged = [PlannedDecorator(e.decorator, e.decorator.definition.stage) for e in effective]
    return sorted(tagged, key=lambda p: int(p.stage))  # stable: ties keep set order


def resolve_conflicts(
    planned: list[PlannedDecorator],
) -> tuple[list[PlannedDecorator], list[ConflictNote]]:
    """Apply the declared precedence rules, recording every adaptation."""
    for i, a in enumerate(planned):
        for b in planned[i + 1 :]:
            if b.name in a.decorator.definition.hard_conflicts or (
                a.name in b.decorator.definition.hard_conflicts
            ):
                raise HardConflictError(a.name, b.name)

    structured_trigger = next(
        (
            p
            for p in planned
            if p.name == "OutputFormat"
            and p.decorator.resolved_params.get("format") in STRUCTURED_FORMATS
        ),
        None,
    )
    if structured_trigger is None:
        return list(planned), []
    notes: list[ConflictNote] = []
    out: list[PlannedDecorator] = []
    trigger_format = structured_trigger.decorator.resolved_params["format"]
    for p in planned:
        if p.decorator.definition.structured_template:
            out.append(PlannedDecorator(p.decorator, p.stage, structured=True))
            notes.append(
                ConflictNote(
                    decorator=p.name,
                    trigger="OutputFormat",
                    detail=(
                        f"{p.name} switched to its structured-output variant because "
                        f"OutputFormat(format={trigger_format}) is active."
                    ),
                )
            )
        else:
            out.append(p)
    return out, notes


def synthesize_directives(planned: list[PlannedDecorator], header: str = "") -> DirectiveBlock:
    """Instantiate each planned decorator's template into one labeled section."""
    sections = []
    for p in planned:
        definition = p.decorator.definition
        template = (
            definition.structured_template
            if p.structured and definition.structured_template
            else definition.directive_template
        )
        try:
            text = template.format_map(p.decorator.resolved_params)
        except (KeyError, IndexError) as exc:
            raise TemplateInstantiationError(p.name, str(exc)) from exc
        sections.append(Section(stage=p.stage, name=p.name, text=text))
    return DirectiveBlock(sections=tuple(sections), header=header)


def _clear_output(targets: tuple[str, ...]) -> str:
    if not targets:
        return "Chat scope cleared."
    return "Cleared from chat scope: " + ", ".join(targets) + "."


class Engine:
    """Facade bundling a registry, a parse mode, and a clock.

    ``compile_turn`` is referentially transparent given (state, message) and
    the engine's injected clock.
    """

    def __init__(
        self,
        registry: Registry | None = None,
        mode: ParseMode | str = ParseMode.STRICT,
        clock: Clock | None = None,
        header: str = "",
    ):
        self.registry = registry or default_registry()
        self.mode = ParseMode(mode)
        self.clock = clock or SystemClock()
        self.header = header

    def validate_invocations(self, invocations, warnings: list[str]) -> list[ValidatedDecorator]:
        """Strict mode propagates the first failure; lenient drops and records it."""
        decs: list[ValidatedDecorator] = []
        for inv in invocations:
            try:
                decs.append(self.registry.validate(inv))
            except (UnknownDecoratorError, ValidationError) as exc:
                if self.mode is ParseMode.STRICT:
                    raise
                warnings.append(str(exc))
        return decs

    def compile_turn(self, state: SessionState, message: str) -> tuple[SessionState, CompiledPrompt]:
        """Run the full pipeline for one user turn.

        Any error aborts the turn before the returned state is built, so the
        caller's state is never half-mutated.
        """
        warnings: list[str] = []
        invocations, body, diagnostics = scan_message(message, self.mode)
        warnings.extend(d.message for d in diagnostics)
        decs = self.validate_invocations(invocations, warnings)

        resolution = resolve_turn(state, decs)
        warnings.extend(w.message for w in resolution.warnings)
        scoped = resolution.state

        planned = plan(resolution.effective)
        planned, notes = resolve_conflicts(planned)
        block = synthesize_directives(planned, header=self.header)

        meta_outputs: list[tuple[str, str]] = []
        for meta_dec in resolution.meta_queue:
            if meta_dec.name == "Clear":
                text = _clear_output(meta_dec.resolved_params.get("targets", ()))
            elif meta_dec.name == "ActiveDecs":
                text = meta_ops.active_decs(scoped)
            elif meta_dec.name == "AvailableDecs":
                text = meta_ops.available_decs(scoped, self.registry)
            else:  # Export
                fmt = meta_dec.resolved_params.get("format", "markdown")
                text = meta_ops.export(scoped, fmt, clock=self.clock).content
            meta_outputs.append((meta_dec.name, text))

        consumed = tuple((name, digest_output(text)) for name, text in meta_outputs)
        record = TurnRecord(
            role="user",
            raw=message,
            body=body,
            decorators=tuple(decs),
            consumed_meta=consumed,
        )
        new_state = record_turn(scoped, record)

        audit = AuditMetadata(
            session_id=state.session_id,
            turn_index=state.turn_counter,
            decorators=tuple(
                DecoratorAudit(p.name, self._origin_of(p.name, resolution.effective), int(p.stage))
                for p in planned
            ),
            conflict_notes=tuple(notes),
            meta_consumed=tuple(name for name, _ in meta_outputs),
            warnings=tuple(warnings),
        )
        # a blank-body turn declaring only meta decorators (scope markers are
        # inert here) is answered locally and never forwarded upstream
        local_only = bool(meta_outputs) and not body.strip() and not any(
            d.kind is DecoratorKind.DIRECTIVE for d in decs
        )
        compiled = CompiledPrompt(
            directive_block=block,
            body=body,
            meta_outputs=tuple(meta_outputs),
            audit=audit,
            local_only=local_only,
        )
        return new_state, compiled

    @staticmethod
    def _origin_of(name: str, effective: EffectiveSet) -> str:
        for entry in effective:
            if entry.decorator.name == name:
                return entry.origin.value
        return Origin.MESSAGE.value


def compile_turn(
    state: SessionState,
    message: str,
    registry: Registry | None = None,
    mode: ParseMode | str = ParseMode.STRICT,
    clock: Clock | None = None,
) -> tuple[SessionState, CompiledPrompt]:
    """Module-level convenience over :class:`Engine`."""
    return Engine(registry=registry, mode=mode, clock=clock).compile_turn(state, message)
