from __future__ import annotations

import pytest

from promptdec import (
    Category,
    DecoratorKind,
    IllegalKindError,
    MalformedExtensionError,
    NameCollisionError,
    Registry,
    Subcategory,
    UnknownDecoratorError,
    ValidationError,
    default_registry,
    parse_invocation,
    render_invocation,
)

from .helpers import conforming_invocations

TABLE_ORDER = [
    "Reasoning",
    "StepByStep",
    "Debate",
    "Interactive",
    "Socratic",
    "Planning",
    "Brainstorm",
    "Rewrite",
    "Import",
    "Critique",
    "Refine",
    "Candor",
    "OutputFormat",
    "Tone",
    "ChatScope",
    "MessageScope",
    "Clear",
    "ActiveDecs",
    "AvailableDecs",
    "Export",
]


class TestCatalog:
    def test_exactly_twenty_in_table_order(self, registry):
        assert [d.canonical_name for d in registry.catalog()] == TABLE_ORDER

    def test_category_split(self, registry):
        cognitive = [d for d in registry.catalog() if d.category is Category.COGNITIVE_GENERATIVE]
        expressive = [d for d in registry.catalog() if d.category is Category.EXPRESSIVE_SYSTEMIC]
        assert len(cognitive) == 12
        assert len(expressive) == 8

    def test_descriptions_are_short_one_liners(self, registry):
        for d in registry.catalog():
            assert d.description
            assert len(d.description) <= 200
            assert "\n" not in d.description

    def test_kind_partition(self, registry):
        metas = {d.canonical_name for d in registry.catalog() if d.kind is DecoratorKind.META}
        markers = {
            d.canonical_name for d in registry.catalog() if d.kind is DecoratorKind.SCOPE_MARKER
        }
        assert metas == {"Clear", "ActiveDecs", "AvailableDecs", "Export"}
        assert markers == {"ChatScope", "MessageScope"}

    def test_stage_assignment_by_subcategory(self, registry):
        expected_stage = {
            Subcategory.INQUIRY_CLARIFICATION: 3,
            Subcategory.PLANNING_IDEATION: 3,
            Subcategory.REASONING_GENERATION: 4,
            Subcategory.EVALUATION_FEEDBACK: 4,
            Subcategory.OUTPUT_FORMATTING: 5,
        }
        for d in registry.catalog():
            if d.canonical_name == "Candor":
                assert int(d.stage) == 5  # expression-level modifier despite its subcategory
            elif d.subcategory in expected_stage:
                assert int(d.stage) == expected_stage[d.subcategory], d.canonical_name
        for name, stage in [
            ("ChatScope", 2),
            ("MessageScope", 2),
            ("Clear", 2),
            ("ActiveDecs", 6),
            ("AvailableDecs", 6),
            ("Export", 6),
        ]:
            assert int(registry.lookup(name).stage) == stage

    def test_optional_params_have_defaults_required_do_not(self, registry):
        for d in registry.catalog():
            for spec in d.param_schema:
                if spec.required:
                    assert spec.default is None
                elif spec.kind.value != "decorator-name":
                    assert spec.default is not None

    def test_directive_templates_only_on_directives(self, registry):
        for d in registry.catalog():
            if d.kind is DecoratorKind.DIRECTIVE:
                assert d.directive_template
            else:
                assert d.directive_template == ""

    def test_two_constructions_are_identical(self):
        assert default_registry().catalog() == default_registry().catalog()


class TestLookup:
    def test_case_insensitive(self, registry):
        d = registry.lookup("reasoning")
        assert d.canonical_name == "Reasoning"
        assert d.subcategory is Subcategory.REASONING_GENERATION

    def test_dump_alias_resolves_to_export(self, registry):
        assert registry.lookup("Dump").canonical_name == "Export"
        assert registry.lookup("dUmP").canonical_name == "Export"

    def test_unknown_name_no_fuzzy_matching(self, registry):
        with pytest.raises(UnknownDecoratorError):
            registry.lookup("Reason")

    def test_total_over_names_and_aliases_any_casing(self, registry):
        for d in registry.catalog():
            for name in (d.canonical_name, *d.aliases):
                for variant in (name.lower(), name.upper(), name):
                    assert registry.lookup(variant).canonical_name == d.canonical_name


class TestValidate:
    def test_candor_high(self, registry):
        v = registry.validate(parse_invocation("+++Candor(level=high)"))
        assert v.resolved_params == {"level": "high"}

    def test_unknown_parameter_rejected(self, registry):
        with pytest.raises(ValidationError) as exc_info:
            registry.validate(parse_invocation("+++Reasoning(depth=2)"))
        assert exc_info.value.code == "unknown-parameter"

    def test_refine_default_iterations(self, registry):
        v = registry.validate(parse_invocation("+++Refine"))
        assert v.resolved_params == {"iterations": 2}

    @pytest.mark.parametrize("value", [0, 11, -1])
    def test_refine_out_of_range(self, registry, value):
        with pytest.raises(ValidationError) as exc_info:
            registry.validate(parse_invocation(f"+++Refine(iterations={value})"))
        assert exc_info.value.code == "value-out-of-range"

    def test_tone_enum(self, registry):
        for style in ("formal", "casual", "technical", "friendly", "humorous"):
            v = registry.validate(parse_invocation(f"+++Tone(style={style})"))
            assert v.resolved_params == {"style": style}
        with pytest.raises(ValidationError) as exc_info:
            registry.validate(parse_invocation("+++Tone(style=persuasive)"))
        assert exc_info.value.code == "value-not-in-enumeration"

    def test_tone_requires_style(self, registry):
        with pytest.raises(ValidationError) as exc_info:
            registry.validate(parse_invocation("+++Tone"))
        assert exc_info.value.code == "missing-required-parameter"

    def test_output_format_enum(self, registry):
        for fmt in ("json", "yaml", "markdown", "xml"):
            v = registry.validate(parse_invocation(f"+++OutputFormat(format={fmt})"))
            assert v.resolved_params == {"format": fmt}
        with pytest.raises(ValidationError):
            registry.validate(parse_invocation("+++OutputFormat(format=toml)"))

    def test_enum_values_match_case_insensitively(self, registry):
        v = registry.validate(parse_invocation("+++Candor(level=HIGH)"))
        assert v.resolved_params == {"level": "high"}

    def test_import_topic_any_non_empty_string(self, registry):
        v = registry.validate(parse_invocation('+++Import(topic="Systems Thinking")'))
        assert v.resolved_params == {"topic": "Systems Thinking"}
        with pytest.raises(ValidationError) as exc_info:
            registry.validate(parse_invocation('+++Import(topic="")'))
        assert exc_info.value.code == "value-out-of-range"

    def test_export_format_default_markdown(self, registry):
        v = registry.validate(parse_invocation("+++Export"))
        assert v.resolved_params == {"format": "markdown"}
        v = registry.validate(parse_invocation("+++Dump"))
        assert v.definition.canonical_name == "Export"

    def test_clear_targets_are_canonicalized(self, registry):
        v = registry.validate(parse_invocation("+++Clear(+++reasoning, +++dump, +++Mystery)"))
        assert v.resolved_params == {"targets": ("Reasoning", "Export", "Mystery")}

    @pytest.mark.parametrize(
        "name",
        [
            "Debate",
            "Reasoning",
            "StepByStep",
            "Interactive",
            "Socratic",
            "Planning",
            "Brainstorm",
            "Rewrite",
            "Critique",
            "ChatScope",
            "MessageScope",
            "ActiveDecs",
            "AvailableDecs",
        ],
    )
    def test_parameterless_decorators_reject_params(self, registry, name):
        with pytest.raises(ValidationError):
            registry.validate(parse_invocation(f"+++{name}(x=1)"))

    def test_conforming_invocations_round_trip(self, registry):
        for inv in conforming_invocations(registry):
            validated = registry.validate(inv)
            reparsed = parse_invocation(render_invocation(inv))
            assert registry.validate(reparsed).resolved_params == validated.resolved_params

    def test_canonical_render_uses_pascal_case(self, registry):
        v = registry.validate(parse_invocation("+++tone(style=formal)"))
        assert v.render() == "+++Tone(style=formal)"


EXTENSION_DOC = [
    {
        "name": "Summarize",
        "description": "Close with a short summary of the response.",
        "subcategory": "Output Formatting",
        "stage": 5,
        "params": [
            {"key": "sentences", "kind": "int", "required": False, "min": 1, "max": 5, "default": 2}
        ],
        "template": "End with a summary of at most {sentences} sentences.",
    }
]


class TestExtensions:
    def test_extension_appends_to_catalog(self, registry):
        loaded = registry.load_extensions(EXTENSION_DOC)
        assert len(registry.catalog()) == 21
        assert loaded[0].canonical_name == "Summarize"
        v = registry.validate(parse_invocation("+++Summarize(sentences=3)"))
        assert v.resolved_params == {"sentences": 3}

    def test_extension_from_file(self, registry, tmp_path):
        path = tmp_path / "ext.json"
        import json

        path.write_text(json.dumps(EXTENSION_DOC), encoding="utf-8")
        registry.load_extensions(path)
        assert "Summarize" in registry

    def test_builtin_name_collision(self, registry):
        doc = [dict(EXTENSION_DOC[0], name="Reasoning")]
        with pytest.raises(NameCollisionError):
            registry.load_extensions(doc)

    def test_alias_collision(self, registry):
        doc = [dict(EXTENSION_DOC[0], name="Dump")]
        with pytest.raises(NameCollisionError):
            registry.load_extensions(doc)

    def test_meta_kind_rejected(self, registry):
        doc = [dict(EXTENSION_DOC[0], kind="meta")]
        with pytest.raises(IllegalKindError):
            registry.load_extensions(doc)

    def test_unknown_fields_rejected(self, registry):
        doc = [dict(EXTENSION_DOC[0], shiny=True)]
        with pytest.raises(MalformedExtensionError):
            registry.load_extensions(doc)

    def test_stage_must_be_directive_stage(self, registry):
        doc = [dict(EXTENSION_DOC[0], stage=6)]
        with pytest.raises(MalformedExtensionError):
            registry.load_extensions(doc)

    def test_optional_param_needs_default(self, registry):
        bad_param = {"key": "sentences", "kind": "int", "required": False}
        doc = [dict(EXTENSION_DOC[0], params=[bad_param])]
        with pytest.raises(MalformedExtensionError):
            registry.load_extensions(doc)

    def test_required_param_rejects_default(self, registry):
        bad_param = {"key": "sentences", "kind": "int", "required": True, "default": 2}
        doc = [dict(EXTENSION_DOC[0], params=[bad_param])]
        with pytest.raises(MalformedExtensionError):
            registry.load_extensions(doc)

    def test_template_placeholder_must_be_declared(self, registry):
        doc = [dict(EXTENSION_DOC[0], template="Summarize in {words} words.")]
        with pytest.raises(MalformedExtensionError):
            registry.load_extensions(doc)

    def test_enum_param_needs_values(self, registry):
        bad_param = {"key": "mode", "kind": "enum", "required": True}
        doc = [dict(EXTENSION_DOC[0], params=[bad_param], template="Mode {mode}.")]
        with pytest.raises(MalformedExtensionError):
            registry.load_extensions(doc)

    def test_not_an_array_rejected(self, registry):
        with pytest.raises(MalformedExtensionError):
            registry.load_extensions('{"name": "X"}')

    def test_validate_with_extra_key_fails_for_every_definition(self, registry):
        from promptdec import DecoratorInvocation, Parameter, ParamValue, ValueKind

        for definition in registry.catalog():
            inv = DecoratorInvocation(
                name=definition.canonical_name,
                params=(Parameter("zz_bogus", ParamValue(ValueKind.INTEGER, "1")),),
            )
            with pytest.raises(ValidationError):
                registry.validate(inv)
