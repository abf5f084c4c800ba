"""promptdec: compiler, session engine, and gateway for +++ prompt decorators.

A message may open with a head-block of control tokens such as::

    +++ChatScope
    +++Reasoning
    +++Tone(style=formal)

    Assess the ethical implications of AI-driven recruitment systems.

The engine parses the head-block, resolves chat/message scope, compiles the
active decorators into a deterministic directive block, executes introspection
decorators locally, and (in gateway mode) forwards the rewritten request to an
upstream chat-completions API.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .compiler import (
    AuditMetadata,
    CompiledPrompt,
    ConflictNote,
    DirectiveBlock,
    Engine,
    PlannedDecorator,
    Section,
    compile_turn,
    plan,
    resolve_conflicts,
    synthesize_directives,
)
from .errors import (
    BothScopeMarkersError,
    ConfigError,
    DecoratorError,
    HardConflictError,
    IllegalKindError,
    InvocationSyntaxError,
    MalformedExtensionError,
    MessageParseError,
    NameCollisionError,
    SessionStoreError,
    TemplateInstantiationError,
    UnknownDecoratorError,
    ValidationError,
)
from .gateway import GatewayConfig, create_app, sanitize_untrusted
from .meta import (
    Clock,
    ExportDocument,
    FixedClock,
    SystemClock,
    active_decs,
    available_decs,
    export,
    import_export_document,
)
from .registry import (
    Category,
    DecoratorDefinition,
    DecoratorKind,
    ParamKind,
    ParamSpec,
    PipelineStage,
    Registry,
    Subcategory,
    ValidatedDecorator,
    default_registry,
)
from .scope import (
    EffectiveEntry,
    EffectiveSet,
    Origin,
    SessionState,
    SessionStore,
    TurnRecord,
    apply_turn,
    clear,
    effective_set,
    load_session,
    save_session,
)
from .syntax import (
    DecoratorInvocation,
    DiagnosticCode,
    Parameter,
    ParamValue,
    ParseDiagnostic,
    ParseMode,
    ScanResult,
    Severity,
    Span,
    ValueKind,
    parse_invocation,
    render_invocation,
    scan_message,
)

__all__ = [
    "__version__",
    # syntax
    "DecoratorInvocation",
    "Parameter",
    "ParamValue",
    "ValueKind",
    "Span",
    "ParseDiagnostic",
    "ParseMode",
    "Severity",
    "DiagnosticCode",
    "ScanResult",
    "scan_message",
    "parse_invocation",
    "render_invocation",
    # registry
    "Registry",
    "default_registry",
    "DecoratorDefinition",
    "ValidatedDecorator",
    "DecoratorKind",
    "ParamKind",
    "ParamSpec",
    "Category",
    "Subcategory",
    "PipelineStage",
    # scope
    "SessionState",
    "SessionStore",
    "TurnRecord",
    "EffectiveEntry",
    "EffectiveSet",
    "Origin",
    "apply_turn",
    "effective_set",
    "clear",
    "load_session",
    "save_session",
    # compiler
    "Engine",
    "compile_turn",
    "plan",
    "resolve_conflicts",
    "synthesize_directives",
    "PlannedDecorator",
    "ConflictNote",
    "Section",
    "DirectiveBlock",
    "CompiledPrompt",
    "AuditMetadata",
    # meta
    "active_decs",
    "available_decs",
    "export",
    "import_export_document",
    "ExportDocument",
    "Clock",
    "SystemClock",
    "FixedClock",
    # gateway
    "GatewayConfig",
    "create_app",
    "sanitize_untrusted",
    # errors
    "DecoratorError",
    "InvocationSyntaxError",
    "MessageParseError",
    "UnknownDecoratorError",
    "ValidationError",
    "NameCollisionError",
    "MalformedExtensionError",
    "IllegalKindError",
    "BothScopeMarkersError",
    "HardConflictError",
    "TemplateInstantiationError",
    "SessionStoreError",
    "ConfigError",
]
