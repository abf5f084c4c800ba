"""Catalog of decorator definitions, schema validation, and extension loading.

The built-in catalog holds the twenty core decorators with their taxonomy
placement, parameter schemas, pipeline-stage assignment, and the directive
templates the compiler instantiates. Extensions loaded from JSON may append
new directive-kind decorators but can never redefine or shadow built-ins.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from pathlib import Path
from typing import Any

from .errors import (
    IllegalKindError,
    MalformedExtensionError,
    NameCollisionError,
    UnknownDecoratorError,
    ValidationError,
)
from .syntax import (
    DecoratorInvocation,
    DiagnosticCode,
    Parameter,
    ParamValue,
    ValueKind,
    render_invocation,
)


class PipelineStage(IntEnum):
    """The six processing stages; directive sections are ordered by stage."""

    PARSING = 1
    SCOPE_RESOLUTION = 2
    PLANNING_INTERACTION = 3
    REASONING_GENERATION = 4
    FORMATTING_EXPRESSION = 5
    INTROSPECTION_EXPORT = 6

    @property
    def label(self) -> str:
        return _STAGE_LABELS[self.value]


_STAGE_LABELS = {
    1: "Parsing",
    2: "ScopeResolution",
    3: "PlanningInteraction",
    4: "ReasoningGeneration",
    5: "FormattingExpression",
    6: "IntrospectionExport",
}


class Category(str, Enum):
    COGNITIVE_GENERATIVE = "Cognitive & Generative"
    EXPRESSIVE_SYSTEMIC = "Expressive & Systemic"


class Subcategory(str, Enum):
    REASONING_GENERATION = "Reasoning & Generation"
    INQUIRY_CLARIFICATION = "Inquiry & Clarification"
    PLANNING_IDEATION = "Planning & Ideation"
    EVALUATION_FEEDBACK = "Evaluation & Feedback"
    OUTPUT_FORMATTING = "Output Formatting"
    SESSION_META_CONTROL = "Session & Meta Control"


_SUBCATEGORY_CATEGORY = {
    Subcategory.REASONING_GENERATION: Category.COGNITIVE_GENERATIVE,
    Subcategory.INQUIRY_CLARIFICATION: Category.COGNITIVE_GENERATIVE,
    Subcategory.PLANNING_IDEATION: Category.COGNITIVE_GENERATIVE,
    Subcategory.EVALUATION_FEEDBACK: Category.COGNITIVE_GENERATIVE,
    Subcategory.OUTPUT_FORMATTING: Category.EXPRESSIVE_SYSTEMIC,
    Subcategory.SESSION_META_CONTROL: Category.EXPRESSIVE_SYSTEMIC,
}


class DecoratorKind(str, Enum):
    DIRECTIVE = "directive"
    META = "meta"
    SCOPE_MARKER = "scope-marker"


class ParamKind(str, Enum):
    INT = "int"
    STRING = "string"
    ENUM = "enum"
    DECORATOR_NAME = "decorator-name"


@dataclass(frozen=True)
class ParamSpec:
    key: str
    kind: ParamKind
    required: bool = False
    choices: tuple[str, ...] = ()
    min_value: int | None = None
    max_value: int | None = None
    default: Any = None
    repeatable: bool = False


@dataclass(frozen=True)
class DecoratorDefinition:
    canonical_name: str
    description: str
    category: Category
    subcategory: Subcategory
    stage: PipelineStage
    kind: DecoratorKind
    param_schema: tuple[ParamSpec, ...] = ()
    directive_template: str = ""
    structured_template: str = ""
    aliases: tuple[str, ...] = ()
    hard_conflicts: frozenset[str] = frozenset()
    builtin: bool = True

    @property
    def takes_params(self) -> bool:
        return bool(self.param_schema)


@dataclass(frozen=True)
class ValidatedDecorator:
    """An invocation checked against its definition, with defaults filled."""

    definition: DecoratorDefinition
    resolved_params: dict[str, Any]
    origin_invocation: DecoratorInvocation

    @property
    def name(self) -> str:
        return self.definition.canonical_name

    @property
    def kind(self) -> DecoratorKind:
        return self.definition.kind

    def canonical_invocation(self) -> DecoratorInvocation:
        """The origin invocation with canonical name and normalized params."""
        params: list[Parameter] = []
        if self.name == "Clear":
            for target in self.resolved_params.get("targets", ()):
                params.append(Parameter("target", ParamValue(ValueKind.DECORATOR, target)))
        else:
            explicit = {p.key for p in self.origin_invocation.params}
            for spec in self.definition.param_schema:
                if spec.key not in explicit:
                    continue
                value = self.resolved_params[spec.key]
                if spec.kind is ParamKind.INT:
                    params.append(Parameter(spec.key, ParamValue(ValueKind.INTEGER, str(value))))
                elif spec.kind is ParamKind.ENUM:
                    params.append(Parameter(spec.key, ParamValue(ValueKind.IDENTIFIER, value)))
                else:
                    params.append(Parameter(spec.key, ParamValue(ValueKind.STRING, value)))
        return DecoratorInvocation(name=self.name, params=tuple(params))

    def render(self) -> str:
        return render_invocation(self.canonical_invocation())


def _d(
    name: str,
    description: str,
    subcategory: Subcategory,
    stage: PipelineStage,
    kind: DecoratorKind = DecoratorKind.DIRECTIVE,
    params: tuple[ParamSpec, ...] = (),
    template: str = "",
    structured: str = "",
    aliases: tuple[str, ...] = (),
) -> DecoratorDefinition:
    return DecoratorDefinition(
        canonical_name=name,
        description=description,
        category=_SUBCATEGORY_CATEGORY[subcategory],
        subcategory=subcategory,
        stage=stage,
        kind=kind,
        param_schema=params,
        directive_template=template,
        structured_template=structured,
        aliases=aliases,
    )


_BUILTIN_DEFINITIONS: tuple[DecoratorDefinition, ...] = (
    _d(
        "Reasoning",
        "Provide reasoning before final answer to improve transparency and traceability.",
        Subcategory.REASONING_GENERATION,
        PipelineStage.REASONING_GENERATION,
        template=(
            'Begin with a section labeled "Reasoning" that lays out your logic and '
            'assumptions, then state the conclusion under a clearly marked "Final Answer" heading.'
        ),
        structured=(
            "Carry your reasoning inside the structured output: put the supporting logic in a "
            'designated "reasoning" field and the conclusion in a "final_answer" field, '
            "rather than writing them as free prose around the payload."
        ),
    ),
    _d(
        "StepByStep",
        "Execute the task in labeled steps with a final synthesis.",
        Subcategory.REASONING_GENERATION,
        PipelineStage.REASONING_GENERATION,
        template=(
            'Work through the task in numbered sections labeled "Step 1", "Step 2", and so on, '
            "then close with a concise final synthesis of the steps."
        ),
        structured=(
            "Represent the work as an ordered list of step entries inside the structured output, "
            "with a final synthesis field; do not emit the steps as free prose around the payload."
        ),
    ),
    _d(
        "Debate",
        "Present multiple positions before synthesizing a conclusion.",
        Subcategory.REASONING_GENERATION,
        PipelineStage.REASONING_GENERATION,
        template=(
            'Present contrasting viewpoints labeled "Position A" and "Position B" (add further '
            "positions if warranted), then reconcile them in a reasoned synthesis."
        ),
        structured=(
            "Carry the contrasting viewpoints inside the structured output as designated fields "
            '(for example "position_a" and "position_b") plus a "synthesis" field for the '
            "conclusion; do not present them as free prose around the payload."
        ),
    ),
    _d(
        "Interactive",
        "Ask clarification questions when prompt is underspecified.",
        Subcategory.INQUIRY_CLARIFICATION,
        PipelineStage.PLANNING_INTERACTION,
        template=(
            "If the request leaves out information you need, ask targeted clarifying questions "
            "first and continue only once the ambiguity is resolved."
        ),
    ),
    _d(
        "Socratic",
        "Apply Socratic questioning to surface assumptions and deepen understanding.",
        Subcategory.INQUIRY_CLARIFICATION,
        PipelineStage.PLANNING_INTERACTION,
        template=(
            "Restate the question, surface the assumptions behind it, and probe it through "
            "layered Socratic questioning before offering a synthesis."
        ),
    ),
    _d(
        "Planning",
        "Outline plan and objectives before task execution.",
        Subcategory.PLANNING_IDEATION,
        PipelineStage.PLANNING_INTERACTION,
        template=(
            'Start with a section labeled "Plan" that outlines objectives, steps, and '
            'constraints, then deliver the main response under an "Execution" heading.'
        ),
    ),
    _d(
        "Brainstorm",
        "Generate multiple labeled ideas without judgment.",
        Subcategory.PLANNING_IDEATION,
        PipelineStage.PLANNING_INTERACTION,
        template=(
            "Generate multiple distinct ideas as a numbered list, favoring variety and "
            "divergence; do not judge or filter them."
        ),
    ),
    _d(
        "Rewrite",
        "Reframe the user prompt into a clearer or more actionable version.",
        Subcategory.PLANNING_IDEATION,
        PipelineStage.PLANNING_INTERACTION,
        template=(
            'First restate the request more clearly under a "Rewritten Prompt" heading, then '
            'answer it under a "Response Based on Rewritten Prompt" heading.'
        ),
    ),
    _d(
        "Import",
        "Import a conceptual lens or discipline into reasoning.",
        Subcategory.PLANNING_IDEATION,
        PipelineStage.PLANNING_INTERACTION,
        params=(ParamSpec("topic", ParamKind.STRING, required=True),),
        template=(
            'Adopt the conceptual lens of "{topic}": name it explicitly and apply it '
            "consistently throughout the response."
        ),
    ),
    _d(
        "Critique",
        "Provide structured feedback with strengths, weaknesses, and improvements.",
        Subcategory.EVALUATION_FEEDBACK,
        PipelineStage.REASONING_GENERATION,
        template=(
            "Give structured feedback using these labeled sections in order: Identify Subject, "
            "Highlight Strengths, Critique Weaknesses, Suggest Improvements, Conclude."
        ),
    ),
    _d(
        "Refine",
        "Iteratively improve the output through labeled passes.",
        Subcategory.EVALUATION_FEEDBACK,
        PipelineStage.REASONING_GENERATION,
        params=(
            ParamSpec("iterations", ParamKind.INT, min_value=1, max_value=10, default=2),
        ),
        template=(
            'Improve the answer through {iterations} labeled passes: write "Iteration 1" first '
            'and continue through "Iteration {iterations}", then present the polished result '
            'under "Final Answer".'
        ),
    ),
    _d(
        "Candor",
        "Control directness and bluntness of feedback.",
        Subcategory.EVALUATION_FEEDBACK,
        PipelineStage.FORMATTING_EXPRESSION,
        params=(
            ParamSpec("level", ParamKind.ENUM, choices=("low", "medium", "high"), default="medium"),
        ),
        template=(
            "Set the directness of feedback to {level}: low reads diplomatic, medium balanced, "
            "high blunt. Stay professional at every level."
        ),
    ),
    _d(
        "OutputFormat",
        "Enforce syntactically valid output structure (JSON, YAML, Markdown, etc.).",
        Subcategory.OUTPUT_FORMATTING,
        PipelineStage.FORMATTING_EXPRESSION,
        params=(
            ParamSpec(
                "format",
                ParamKind.ENUM,
                required=True,
                choices=("json", "yaml", "markdown", "xml"),
            ),
        ),
        template=(
            "Return the final output as syntactically valid {format}, with no commentary "
            "outside the {format} payload."
        ),
    ),
    _d(
        "Tone",
        "Configure tone or stylistic register (formal, technical, friendly, etc.).",
        Subcategory.OUTPUT_FORMATTING,
        PipelineStage.FORMATTING_EXPRESSION,
        params=(
            ParamSpec(
                "style",
                ParamKind.ENUM,
                required=True,
                choices=("formal", "casual", "technical", "friendly", "humorous"),
            ),
        ),
        template=(
            "Write in a {style} register, adjusting vocabulary and phrasing to match while "
            "keeping factual content unchanged."
        ),
    ),
    _d(
        "ChatScope",
        "Activate persistent behavior across conversation turns.",
        Subcategory.SESSION_META_CONTROL,
        PipelineStage.SCOPE_RESOLUTION,
        kind=DecoratorKind.SCOPE_MARKER,
    ),
    _d(
        "MessageScope",
        "Restrict decorator effects to the current message only.",
        Subcategory.SESSION_META_CONTROL,
        PipelineStage.SCOPE_RESOLUTION,
        kind=DecoratorKind.SCOPE_MARKER,
    ),
    _d(
        "Clear",
        "Remove all or selected decorators from chat scope.",
        Subcategory.SESSION_META_CONTROL,
        PipelineStage.SCOPE_RESOLUTION,
        kind=DecoratorKind.META,
        params=(ParamSpec("target", ParamKind.DECORATOR_NAME, repeatable=True),),
    ),
    _d(
        "ActiveDecs",
        "List all active decorators in the current chat session.",
        Subcategory.SESSION_META_CONTROL,
        PipelineStage.INTROSPECTION_EXPORT,
        kind=DecoratorKind.META,
    ),
    _d(
        "AvailableDecs",
        "Display catalog of supported decorators with activation status.",
        Subcategory.SESSION_META_CONTROL,
        PipelineStage.INTROSPECTION_EXPORT,
        kind=DecoratorKind.META,
    ),
    _d(
        "Export",
        "Export conversation content and metadata for auditing or recordkeeping.",
        Subcategory.SESSION_META_CONTROL,
        PipelineStage.INTROSPECTION_EXPORT,
        kind=DecoratorKind.META,
        params=(
            ParamSpec(
                "format",
                ParamKind.ENUM,
                choices=("text", "markdown", "json"),
                default="markdown",
            ),
        ),
        aliases=("Dump",),
    ),
)


class Registry:
    """Ordered, case-insensitive catalog of decorator definitions."""

    def __init__(self, definitions: tuple[DecoratorDefinition, ...] = _BUILTIN_DEFINITIONS):
        self._definitions: list[DecoratorDefinition] = []
        self._index: dict[str, DecoratorDefinition] = {}
        for definition in definitions:
            self.register(definition)

    def register(self, definition: DecoratorDefinition) -> None:
        for name in (definition.canonical_name, *definition.aliases):
            if name.lower() in self._index:
                raise NameCollisionError(f"decorator name '{name}' is already registered")
        self._definitions.append(definition)
        for name in (definition.canonical_name, *definition.aliases):
            self._index[name.lower()] = definition

    def lookup(self, name: str) -> DecoratorDefinition:
        definition = self._index.get(name.lower())
        if definition is None:
            raise UnknownDecoratorError(name)
        return definition

    def __contains__(self, name: str) -> bool:
        return name.lower() in self._index

    def catalog(self) -> tuple[DecoratorDefinition, ...]:
        return tuple(self._definitions)

    def __len__(self) -> int:
        return len(self._definitions)

    def validate(self, inv: DecoratorInvocation) -> ValidatedDecorator:
        """Check an invocation against its schema and fill parameter defaults."""
        definition = self.lookup(inv.name)
        if definition.canonical_name == "Clear":
            return self._validate_clear(definition, inv)
        schema = {spec.key: spec for spec in definition.param_schema}
        resolved: dict[str, Any] = {}
        for param in inv.params:
            if param.value.kind is ValueKind.DECORATOR:
                raise ValidationError(
                    DiagnosticCode.UNKNOWN_PARAMETER.value,
                    f"{definition.canonical_name} does not accept decorator-name arguments",
                    definition.canonical_name,
                )
            spec = schema.get(param.key)
            if spec is None:
                raise ValidationError(
                    DiagnosticCode.UNKNOWN_PARAMETER.value,
                    f"{definition.canonical_name} has no parameter '{param.key}'",
                    definition.canonical_name,
                )
            resolved[param.key] = self._coerce(definition, spec, param.value)
        for spec in definition.param_schema:
            if spec.key in resolved:
                continue
            if spec.required:
                raise ValidationError(
                    DiagnosticCode.MISSING_REQUIRED_PARAMETER.value,
                    f"{definition.canonical_name} requires parameter '{spec.key}'",
                    definition.canonical_name,
                )
            resolved[spec.key] = spec.default
        return ValidatedDecorator(definition, resolved, inv)

    def _validate_clear(
        self, definition: DecoratorDefinition, inv: DecoratorInvocation
    ) -> ValidatedDecorator:
        targets: list[str] = []
        for param in inv.params:
            if param.key != "target" or param.value.kind not in (
                ValueKind.DECORATOR,
                ValueKind.IDENTIFIER,
            ):
                raise ValidationError(
                    DiagnosticCode.UNKNOWN_PARAMETER.value,
                    "Clear only accepts decorator-name targets",
                    "Clear",
                )
            name = param.value.text
            # known names are canonicalized; unknown ones stay as written and
            # surface later as a no-op warning
            if name in self:
                targets.append(self.lookup(name).canonical_name)
            else:
                targets.append(name)
        return ValidatedDecorator(definition, {"targets": tuple(targets)}, inv)

    def _coerce(self, definition: DecoratorDefinition, spec: ParamSpec, value: ParamValue) -> Any:
        name = definition.canonical_name
        if spec.kind is ParamKind.INT:
            if value.kind is not ValueKind.INTEGER:
                raise ValidationError(
                    DiagnosticCode.VALUE_OUT_OF_RANGE.value,
                    f"{name}.{spec.key} must be an integer",
                    name,
                )
            number = value.as_int()
            if spec.min_value is not None and number < spec.min_value:
                raise ValidationError(
                    DiagnosticCode.VALUE_OUT_OF_RANGE.value,
                    f"{name}.{spec.key} must be >= {spec.min_value}",
                    name,
                )
            if spec.max_value is not None and number > spec.max_value:
                raise ValidationError(
                    DiagnosticCode.VALUE_OUT_OF_RANGE.value,
                    f"{name}.{spec.key} must be <= {spec.max_value}",
                    name,
                )
            return number
        if value.kind not in (ValueKind.IDENTIFIER, ValueKind.STRING):
            raise ValidationError(
                DiagnosticCode.VALUE_NOT_IN_ENUMERATION.value,
                f"{name}.{spec.key} must be textual",
                name,
            )
        text = value.text
        if spec.kind is ParamKind.ENUM:
            match = next((c for c in spec.choices if c.lower() == text.lower()), None)
            if match is None:
                allowed = ", ".join(spec.choices)
                raise ValidationError(
                    DiagnosticCode.VALUE_NOT_IN_ENUMERATION.value,
                    f"{name}.{spec.key} must be one of: {allowed}",
                    name,
                )
            return match
        if not text:
            raise ValidationError(
                DiagnosticCode.VALUE_OUT_OF_RANGE.value,
                f"{name}.{spec.key} must be a non-empty string",
                name,
            )
        return text

    def load_extensions(self, doc: str | Path | list) -> list[DecoratorDefinition]:
        """Append directive definitions from a JSON extension document.

        ``doc`` may be a path, a JSON string, or the already-parsed array.
        """
        data = _read_extension_doc(doc)
        loaded: list[DecoratorDefinition] = []
        for i, entry in enumerate(data):
            definition = _parse_extension_entry(entry, position=i)
            self.register(definition)
            loaded.append(definition)
        return loaded


_EXTENSION_FIELDS = {"name", "description", "subcategory", "stage", "params", "template", "kind"}
_EXTENSION_PARAM_FIELDS = {"key", "kind", "required", "values", "min", "max", "default"}


def _read_extension_doc(doc: str | Path | list) -> list:
    if isinstance(doc, list):
        data: Any = doc
    else:
        text = doc.read_text(encoding="utf-8") if isinstance(doc, Path) else doc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedExtensionError(f"extension document is not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise MalformedExtensionError("extension document must be a top-level JSON array")
    return data


def _parse_extension_entry(entry: Any, position: int) -> DecoratorDefinition:
    where = f"extension entry {position}"
    if not isinstance(entry, dict):
        raise MalformedExtensionError(f"{where} must be a JSON object")
    unknown = set(entry) - _EXTENSION_FIELDS
    if unknown:
        raise MalformedExtensionError(f"{where} has unknown fields: {sorted(unknown)}")
    kind = entry.get("kind", "directive")
    if kind != "directive":
        raise IllegalKindError(f"{where}: extensions may only declare kind=directive, got '{kind}'")
    name = entry.get("name")
    if not isinstance(name, str) or not name or not name[0].isalpha() or not name.isalnum():
        raise MalformedExtensionError(f"{where}: 'name' must be an alphanumeric identifier")
    description = entry.get("description")
    if not isinstance(description, str) or not description or len(description) > 200:
        raise MalformedExtensionError(f"{where}: 'description' must be 1-200 characters")
    try:
        subcategory = Subcategory(entry.get("subcategory"))
    except ValueError:
        allowed = ", ".join(s.value for s in Subcategory)
        raise MalformedExtensionError(f"{where}: 'subcategory' must be one of: {allowed}") from None
    stage = entry.get("stage")
    if stage not in (3, 4, 5):
        raise MalformedExtensionError(f"{where}: 'stage' must be 3, 4, or 5 for directives")
    template = entry.get("template")
    if not isinstance(template, str) or not template:
        raise MalformedExtensionError(f"{where}: 'template' must be a non-empty string")
    params = _parse_extension_params(entry.get("params", []), where)
    _check_template_placeholders(template, {p.key for p in params}, where)
    return DecoratorDefinition(
        canonical_name=name,
        description=description,
        category=_SUBCATEGORY_CATEGORY[subcategory],
        subcategory=subcategory,
        stage=PipelineStage(stage),
        kind=DecoratorKind.DIRECTIVE,
        param_schema=params,
        directive_template=template,
        builtin=False,
    )


def _parse_extension_params(raw: Any, where: str) -> tuple[ParamSpec, ...]:
    if not isinstance(raw, list):
        raise MalformedExtensionError(f"{where}: 'params' must be an array")
    specs: list[ParamSpec] = []
    for j, item in enumerate(raw):
        spot = f"{where}, param {j}"
        if not isinstance(item, dict):
            raise MalformedExtensionError(f"{spot} must be a JSON object")
        unknown = set(item) - _EXTENSION_PARAM_FIELDS
        if unknown:
            raise MalformedExtensionError(f"{spot} has unknown fields: {sorted(unknown)}")
        key = item.get("key")
        if not isinstance(key, str) or not key:
            raise MalformedExtensionError(f"{spot}: 'key' must be a non-empty string")
        kind_text = item.get("kind")
        if kind_text not in ("int", "string", "enum"):
            raise MalformedExtensionError(f"{spot}: 'kind' must be int, string, or enum")
        kind = ParamKind(kind_text)
        required = bool(item.get("required", False))
        values = item.get("values")
        if kind is ParamKind.ENUM:
            if not isinstance(values, list) or not values or not all(isinstance(v, str) for v in values):
                raise MalformedExtensionError(f"{spot}: enum params need a 'values' string array")
        elif values is not None:
            raise MalformedExtensionError(f"{spot}: 'values' is only valid for enum params")
        default = item.get("default")
        if required and default is not None:
            raise MalformedExtensionError(f"{spot}: required params cannot carry a default")
        if not required and default is None:
            raise MalformedExtensionError(f"{spot}: optional params must carry a default")
        specs.append(
            ParamSpec(
                key=key,
                kind=kind,
                required=required,
                choices=tuple(values) if values else (),
                min_value=item.get("min"),
                max_value=item.get("max"),
                default=default,
            )
        )
    keys = [s.key for s in specs]
    if len(keys) != len(set(keys)):
        raise MalformedExtensionError(f"{where}: duplicate param keys")
    return tuple(specs)


def _check_template_placeholders(template: str, keys: set[str], where: str) -> None:
    import string

    for _, field_name, _, _ in string.Formatter().parse(template):
        if field_name is None:
            continue
        if field_name not in keys:
            raise MalformedExtensionError(
                f"{where}: template placeholder '{{{field_name}}}' is not a declared param"
            )


def default_registry() -> Registry:
    """A fresh registry holding exactly the built-in catalog."""
    return Registry()


def with_hard_conflict(definition: DecoratorDefinition, *names: str) -> DecoratorDefinition:
    """Copy of ``definition`` declaring it incompatible with ``names``."""
    return replace(definition, hard_conflicts=frozenset(names) | definition.hard_conflicts)
