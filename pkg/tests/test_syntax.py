from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from promptdec import (
    DecoratorInvocation,
    InvocationSyntaxError,
    MessageParseError,
    Parameter,
    ParamValue,
    ParseMode,
    ValueKind,
    parse_invocation,
    render_invocation,
    scan_message,
)

from .naive_scanner import naive_scan


def signature(inv: DecoratorInvocation):
    return (inv.name, tuple((p.key, p.value.kind.value, p.value.text) for p in inv.params))


class TestScanMessage:
    def test_intro_example(self):
        text = (
            "+++Reasoning\n+++Debate\n\n"
            "Explain the implications of using facial recognition in public spaces."
        )
        invocations, body, diagnostics = scan_message(text)
        assert [i.name for i in invocations] == ["Reasoning", "Debate"]
        assert body == "Explain the implications of using facial recognition in public spaces."
        assert diagnostics == ()

    def test_no_head_block_passthrough(self):
        text = "Explain photosynthesis for a class."
        invocations, body, _ = scan_message(text)
        assert invocations == ()
        assert body == text

    def test_plain_text_starting_with_blank_line_is_untouched(self):
        text = "\nhello"
        assert scan_message(text).body == text

    def test_mid_body_tokens_stay_literal(self):
        text = "+++Reasoning\n\nsome text\n+++Clear\nmore"
        invocations, body, _ = scan_message(text)
        assert [i.name for i in invocations] == ["Reasoning"]
        assert "+++Clear" in body

    def test_separator_blank_line_is_optional(self):
        invocations, body, _ = scan_message("+++Reasoning\nExplain X")
        assert [i.name for i in invocations] == ["Reasoning"]
        assert body == "Explain X"

    def test_only_one_blank_line_is_stripped(self):
        _, body, _ = scan_message("+++Reasoning\n\n\nbody")
        assert body == "\nbody"

    def test_strict_mode_raises_on_malformed_head_line(self):
        with pytest.raises(MessageParseError) as exc_info:
            scan_message("+++Refine(iterations=3\n\nhi", ParseMode.STRICT)
        assert exc_info.value.diagnostics[0].severity.value == "error"

    def test_lenient_mode_demotes_malformed_line_and_rest(self):
        text = "+++Reasoning\n+++Refine(iterations=3\n+++Tone(style=formal)\nbody"
        invocations, body, diagnostics = scan_message(text, ParseMode.LENIENT)
        assert [i.name for i in invocations] == ["Reasoning"]
        assert body == "+++Refine(iterations=3\n+++Tone(style=formal)\nbody"
        assert len(diagnostics) == 1
        assert diagnostics[0].severity.value == "warning"

    def test_leading_whitespace_before_marker_is_accepted(self):
        a = scan_message("+++Tone(style=formal)\n\nx").invocations
        b = scan_message("   \t+++Tone(style=formal)\n\nx").invocations
        assert signature(a[0]) == signature(b[0])

    def test_spans_are_byte_offsets_into_message(self):
        text = "+++Reasoning\n+++Debate\nbody"
        invocations = scan_message(text).invocations
        assert invocations[0].span.line == 0
        assert text.encode()[invocations[1].span.start : invocations[1].span.end] == b"+++Debate"


class TestParseInvocation:
    def test_refine_with_iterations(self):
        inv = parse_invocation("+++Refine(iterations=3)")
        assert signature(inv) == ("Refine", (("iterations", "integer", "3"),))

    def test_import_with_quoted_topic(self):
        inv = parse_invocation('+++Import(topic="Systems Thinking")')
        assert signature(inv) == ("Import", (("topic", "string", "Systems Thinking"),))

    def test_clear_with_decorator_targets(self):
        inv = parse_invocation("+++Clear(+++Reasoning, +++Tone)")
        assert signature(inv) == (
            "Clear",
            (("target", "decorator", "Reasoning"), ("target", "decorator", "Tone")),
        )

    def test_clear_accepts_bare_names(self):
        inv = parse_invocation("+++Clear(Reasoning)")
        assert signature(inv) == ("Clear", (("target", "decorator", "Reasoning"),))

    def test_empty_parens_equal_bare_form(self):
        assert signature(parse_invocation("+++Reasoning()")) == signature(
            parse_invocation("+++Reasoning")
        )

    def test_escapes_in_quoted_strings(self):
        inv = parse_invocation(r'+++Import(topic="say \"hi\" \\ done")')
        assert inv.params[0].value.text == 'say "hi" \\ done'

    @pytest.mark.parametrize(
        "line,code",
        [
            ("+++", "empty-name"),
            ("+++ Reasoning", "empty-name"),
            ("+++Refine(iterations=3", "malformed-invocation"),
            ("+++Tone(style=)", "malformed-parameter"),
            ("+++Tone(formal)", "malformed-parameter"),
            ('+++Import(topic="oops)', "malformed-parameter"),
            ('+++Import(topic="bad\\n")', "malformed-parameter"),
            ("+++Reasoning extra", "trailing-garbage"),
            ("+++Tone(style=formal) x", "trailing-garbage"),
            ("+++Refine(iterations=1, iterations=2)", "duplicate-parameter-key"),
            ("+++Tone(+++Reasoning)", "malformed-parameter"),
            ("+++Refine(iterations=+3)", "malformed-parameter"),
        ],
    )
    def test_malformed_lines(self, line, code):
        with pytest.raises(InvocationSyntaxError) as exc_info:
            parse_invocation(line)
        assert exc_info.value.code == code

    def test_integer_values_are_canonicalized(self):
        inv = parse_invocation("+++Refine(iterations=03)")
        assert inv.params[0].value.text == "3"


class TestRenderInvocation:
    def test_parameterless_canonical_form(self):
        assert render_invocation(parse_invocation("+++Reasoning")) == "+++Reasoning"

    def test_tone_style_formal(self):
        assert render_invocation(parse_invocation("+++Tone( style = formal )")) == (
            "+++Tone(style=formal)"
        )

    def test_clear_targets_render_positionally(self):
        rendered = render_invocation(parse_invocation("+++Clear(+++Reasoning,+++Tone)"))
        assert rendered == "+++Clear(+++Reasoning, +++Tone)"

    def test_string_requoted_with_minimal_escapes(self):
        rendered = render_invocation(parse_invocation(r'+++Import(topic="a\"b\\c")'))
        assert rendered == r'+++Import(topic="a\"b\\c")'


# --- property tests ----------------------------------------------------------

names = st.from_regex(r"[A-Za-z][A-Za-z0-9]{0,8}", fullmatch=True)
keys = st.from_regex(r"[A-Za-z][A-Za-z0-9_]{0,8}", fullmatch=True)
ident_values = st.from_regex(r"[A-Za-z][A-Za-z0-9_]{0,8}", fullmatch=True)
string_values = st.text(
    st.characters(blacklist_categories=("Cs",), blacklist_characters="\n\r"), max_size=12
)


@st.composite
def invocations(draw):
    name = draw(names)
    if name.lower() == "clear":
        targets = draw(st.lists(names, max_size=3))
        params = tuple(
            Parameter("target", ParamValue(ValueKind.DECORATOR, t)) for t in targets
        )
        return DecoratorInvocation(name=name, params=params)
    n = draw(st.integers(min_value=0, max_value=3))
    params = []
    used = set()
    for _ in range(n):
        key = draw(keys.filter(lambda k: k not in used))
        used.add(key)
        kind = draw(st.sampled_from(["int", "ident", "string"]))
        if kind == "int":
            value = ParamValue(ValueKind.INTEGER, str(draw(st.integers(-9999, 9999))))
        elif kind == "ident":
            value = ParamValue(ValueKind.IDENTIFIER, draw(ident_values))
        else:
            value = ParamValue(ValueKind.STRING, draw(string_values))
        params.append(Parameter(key, value))
    return DecoratorInvocation(name=name, params=tuple(params))


@given(invocations())
@settings(max_examples=300)
def test_parse_render_round_trip(inv):
    rendered = render_invocation(inv)
    reparsed = parse_invocation(rendered)
    assert signature(reparsed) == signature(inv)
    # canonical form is a fixpoint
    assert render_invocation(reparsed) == rendered


@given(st.text(max_size=300))
@settings(max_examples=300)
def test_lenient_scan_never_raises_and_matches_oracle(text):
    result = scan_message(text, ParseMode.LENIENT)
    expected_invocations, expected_body = naive_scan(text)
    assert [signature(i) for i in result.invocations] == [
        (name, params) for name, params in expected_invocations
    ]
    assert result.body == expected_body


def _random_message(rng: random.Random) -> str:
    head_pool = [
        "+++Reasoning",
        "+++StepByStep",
        "+++debate",
        "  +++Tone(style=formal)",
        "\t+++Refine(iterations=3)",
        "+++Refine( iterations = 10 )",
        '+++Import(topic="Systems Thinking")',
        '+++Import(topic="quote \\" and slash \\\\")',
        "+++Clear",
        "+++Clear(+++Reasoning, +++Tone)",
        "+++Clear(Reasoning)",
        "+++Export(format=json)",
        "+++Dump",
        "+++SomethingUnknown(x=1, y=two)",
        "+++A(b=-4)",
        "+++Name()",
        # malformed candidates
        "+++",
        "+++ Gap",
        "++++Extra",
        "+++Bad(",
        "+++Bad(x)",
        "+++Bad(x=])",
        "+++Bad(x=1,)",
        "+++Bad(x=1, x=2)",
        '+++Bad(t="unterminated',
        '+++Bad(t="nope\\q")',
        "+++Bad(x=1) trailing",
        "+++Tone(+++Reasoning)",
    ]
    body_pool = [
        "",
        "plain question",
        "line with +++Clear inside",
        "  indented",
        "unicode: héllo ≤ wörld ✓",
        "a+++b",
        "+ + +Clear",
        "   ",
        "final line",
    ]
    lines = [rng.choice(head_pool) for _ in range(rng.randint(0, 4))]
    if rng.random() < 0.7:
        lines.append("")
    lines.extend(rng.choice(body_pool) for _ in range(rng.randint(0, 4)))
    message = "\n".join(lines)
    if rng.random() < 0.3:
        message += "\n"
    return message


def test_fuzz_scan_matches_oracle_10k():
    rng = random.Random(20260811)
    mismatches = 0
    for _ in range(10_000):
        message = _random_message(rng)
        result = scan_message(message, ParseMode.LENIENT)
        expected_invocations, expected_body = naive_scan(message)
        got = ([signature(i) for i in result.invocations], result.body)
        want = ([(n, p) for n, p in expected_invocations], expected_body)
        if got != want:
            mismatches += 1
    assert mismatches == 0


def test_strict_and_lenient_agree_on_clean_messages():
    rng = random.Random(99)
    checked = 0
    for _ in range(2000):
        message = _random_message(rng)
        lenient = scan_message(message, ParseMode.LENIENT)
        if lenient.diagnostics:
            with pytest.raises(MessageParseError):
                scan_message(message, ParseMode.STRICT)
        else:
            strict = scan_message(message, ParseMode.STRICT)
            assert strict == lenient
            checked += 1
    assert checked > 0
