"""Developer CLI: expand prompts, lint corpora, inspect the registry, run the gateway.

Payloads go to stdout, diagnostics to stderr, so commands compose in pipelines.
Exit codes: 0 clean, 1 warnings only, 2 errors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import meta as meta_ops
from .compiler import Engine, plan, resolve_conflicts
from .errors import ConfigError, DecoratorError, SessionStoreError
from .gateway import GatewayConfig, build_registry, create_app
from .registry import Registry, default_registry
from .scope import (
    SessionState,
    clear,
    load_session,
    resolve_turn,
    save_session,
)
from .syntax import ParseMode, Severity, scan_message

EXIT_OK = 0
EXIT_WARNINGS = 1
EXIT_ERRORS = 2


@click.group()
@click.option("--strict/--lenient", "strict", default=True, help="Parse mode for head lines.")
@click.option("--config", "config_path", type=click.Path(), default=None, help="Gateway config file.")
@click.pass_context
def main(ctx, strict: bool, config_path: str | None):
    """Compile +++ decorator head-blocks into directive prompts."""
    ctx.ensure_object(dict)
    ctx.obj["mode"] = ParseMode.STRICT if strict else ParseMode.LENIENT
    ctx.obj["config_path"] = config_path


def _load_registry(ctx) -> Registry:
    config_path = ctx.obj.get("config_path")
    if config_path:
        return build_registry(GatewayConfig.from_file(config_path))
    return default_registry()


def _read_message(source: str | None) -> str:
    if source is None or source == "-":
        return sys.stdin.read()
    return Path(source).read_text(encoding="utf-8")


def _load_or_fresh(path: Path, registry: Registry) -> SessionState:
    if path.is_file():
        return load_session(path, registry)
    return SessionState.fresh(session_id=path.stem)


@main.command()
@click.argument("message_file", required=False)
@click.option("--session", "session_path", type=click.Path(), default=None)
@click.option("--dry-run", is_flag=True, help="Compute without persisting the session.")
@click.pass_context
def expand(ctx, message_file: str | None, session_path: str | None, dry_run: bool):
    """Compile one message: directive block, '---', then the body."""
    registry = _load_registry(ctx)
    engine = Engine(registry=registry, mode=ctx.obj["mode"])
    try:
        message = _read_message(message_file)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(EXIT_ERRORS)
    state = SessionState.fresh()
    if session_path:
        state = _load_or_fresh(Path(session_path), registry)
    try:
        new_state, compiled = engine.compile_turn(state, message)
    except DecoratorError as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(EXIT_ERRORS)
    if compiled.directive_block.rendered:
        click.echo(compiled.directive_block.rendered)
    click.echo("---")
    if compiled.body:
        click.echo(compiled.body)
    for name, text in compiled.meta_outputs:
        click.echo(f"[meta] {name}:", err=True)
        click.echo(text, err=True)
    for warning in compiled.audit.warnings:
        click.echo(f"warning: {warning}", err=True)
    if session_path and not dry_run:
        save_session(new_state, session_path)


def _levenshtein(a: str, b: str) -> int:
    if not a:
        return len(b)
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[-1]


def suggest_name(name: str, registry: Registry, max_distance: int = 2) -> str | None:
    """Nearest catalog name within the edit-distance budget.

    Prefix-tolerant: a partial spelling like 'Reson' still reaches 'Reasoning'
    because the candidate is also compared against its same-length prefix.
    Ties resolve to catalog order.
    """
    lowered = name.lower()
    best: tuple[int, int, str] | None = None
    for rank, definition in enumerate(registry.catalog()):
        for candidate in (definition.canonical_name, *definition.aliases):
            cl = candidate.lower()
            distance = min(
                _levenshtein(lowered, cl),
                _levenshtein(lowered, cl[: max(len(lowered), 1)]),
            )
            if distance > max_distance:
                continue
            key = (distance, rank, definition.canonical_name)
            if best is None or key < best:
                best = key
    return best[2] if best else None


def _lint_message(text: str, registry: Registry, origin: str, line_offset: int) -> list[tuple[str, str]]:
    """Diagnostics for one message as (severity, rendered line) pairs."""
    found: list[tuple[str, str]] = []

    def emit(severity: Severity, line: int | None, message: str, code: str):
        where = f"{origin}:{line_offset + line + 1}" if line is not None else origin
        found.append((severity.value, f"{where}: {severity.value}: {message} [{code}]"))

    invocations, _, diagnostics = scan_message(text, ParseMode.LENIENT)
    for diag in diagnostics:
        emit(diag.severity, diag.span.line, diag.message, diag.code.value)

    decs = []
    for inv in invocations:
        try:
            definition = registry.lookup(inv.name)
        except DecoratorError:
            hint = suggest_name(inv.name, registry)
            message = f"unknown decorator '{inv.name}'"
            if hint:
                message += f" (did you mean '{hint}'?)"
            emit(Severity.WARNING, inv.span.line, message, "unknown-decorator")
            continue
        try:
            decs.append(registry.validate(inv))
        except DecoratorError as exc:
            emit(Severity.ERROR, inv.span.line, str(exc), getattr(exc, "code", "validation"))

    try:
        resolution = resolve_turn(SessionState.fresh(), decs)
    except DecoratorError as exc:
        emit(Severity.ERROR, None, str(exc), "both-scope-markers")
        return found
    for warning in resolution.warnings:
        if warning.code.value == "inactive-clear-target":
            continue  # meaningless without a live session
        emit(Severity.WARNING, None, warning.message, warning.code.value)
    _, notes = resolve_conflicts(plan(resolution.effective))
    for note in notes:
        emit(Severity.WARNING, None, note.detail, "conflict-adaptation")
    return found


@main.command()
@click.argument("paths", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--split", is_flag=True, help="Treat '===' lines as message separators.")
@click.pass_context
def lint(ctx, paths: tuple[str, ...], split: bool):
    """Check message files for unknown decorators, schema errors, and conflicts."""
    registry = _load_registry(ctx)
    severities: set[str] = set()
    for path in paths:
        text = Path(path).read_text(encoding="utf-8")
        chunks: list[tuple[int, str]] = []
        if split:
            offset = 0
            current: list[str] = []
            for line in text.split("\n"):
                if line == "===":
                    chunks.append((offset, "\n".join(current)))
                    offset += len(current) + 1
                    current = []
                else:
                    current.append(line)
            chunks.append((offset, "\n".join(current)))
        else:
            chunks = [(0, text)]
        for line_offset, chunk in chunks:
            for severity, rendered in _lint_message(chunk, registry, path, line_offset):
                severities.add(severity)
                click.echo(rendered, err=True)
    if "error" in severities:
        ctx.exit(EXIT_ERRORS)
    if "warning" in severities:
        ctx.exit(EXIT_WARNINGS)
    ctx.exit(EXIT_OK)


@main.group()
def registry():
    """Inspect the decorator catalog."""


@registry.command("list")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable catalog.")
@click.option("--session", "session_path", type=click.Path(), default=None)
@click.pass_context
def registry_list(ctx, as_json: bool, session_path: str | None):
    reg = _load_registry(ctx)
    state = SessionState.fresh()
    if session_path and Path(session_path).is_file():
        state = load_session(Path(session_path), reg)
    if not as_json:
        click.echo(meta_ops.available_decs(state, reg))
        return
    payload = [
        {
            "name": d.canonical_name,
            "aliases": list(d.aliases),
            "category": d.category.value,
            "subcategory": d.subcategory.value,
            "stage": int(d.stage),
            "kind": d.kind.value,
            "description": d.description,
            "params": [
                {
                    "key": p.key,
                    "kind": p.kind.value,
                    "required": p.required,
                    "values": list(p.choices) or None,
                    "min": p.min_value,
                    "max": p.max_value,
                    "default": p.default,
                }
                for p in d.param_schema
            ],
            "active": d.canonical_name in state.chat_scope,
        }
        for d in reg.catalog()
    ]
    click.echo(json.dumps(payload, indent=2, ensure_ascii=False))


@main.group()
def session():
    """Inspect or reset a persisted session file."""


@session.command("show")
@click.option("--session", "session_path", type=click.Path(exists=True), required=True)
@click.pass_context
def session_show(ctx, session_path: str):
    reg = _load_registry(ctx)
    state = load_session(Path(session_path), reg)
    click.echo(f"session: {state.session_id}")
    click.echo(f"turns: {state.turn_counter}")
    click.echo("active decorators:")
    click.echo(meta_ops.active_decs(state))


@session.command("clear")
@click.argument("targets", nargs=-1)
@click.option("--session", "session_path", type=click.Path(exists=True), required=True)
@click.pass_context
def session_clear(ctx, targets: tuple[str, ...], session_path: str):
    reg = _load_registry(ctx)
    state = load_session(Path(session_path), reg)
    canonical = []
    for target in targets:
        canonical.append(reg.lookup(target).canonical_name if target in reg else target)
    state = clear(state, canonical)
    save_session(state, session_path)
    click.echo(meta_ops.active_decs(state))


@main.command()
@click.option("--session", "session_path", type=click.Path(exists=True), required=True)
@click.option("--format", "fmt", type=click.Choice(["text", "markdown", "json"]), default="markdown")
@click.option("--output", "-o", type=click.Path(), default=None)
@click.pass_context
def export(ctx, session_path: str, fmt: str, output: str | None):
    """Write the session export document."""
    reg = _load_registry(ctx)
    try:
        state = load_session(Path(session_path), reg)
    except SessionStoreError as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(EXIT_ERRORS)
    document = meta_ops.export(state, fmt)
    if output:
        Path(output).write_text(document.content, encoding="utf-8")
    else:
        click.echo(document.content, nl=False)
        if not document.content.endswith("\n"):
            click.echo()


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.pass_context
def serve(ctx, config_path: str):
    """Run the gateway until interrupted."""
    import uvicorn

    try:
        config = GatewayConfig.from_file(config_path)
        app = create_app(config)
    except (ConfigError, DecoratorError) as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(EXIT_ERRORS)
    uvicorn.run(app, host=config.host, port=config.port)


if __name__ == "__main__":
    main()
