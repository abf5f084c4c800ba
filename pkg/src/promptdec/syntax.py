"""Lexing, parsing, and canonical rendering of ``+++Name(params)`` head lines.

Decorator tokens are recognized only in the head-block: the maximal prefix of
message lines that begin (after optional indentation) with ``+++``. Everything
below the head-block is body text and is never interpreted, so a ``+++`` in
running prose stays literal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .errors import InvocationSyntaxError, MessageParseError

_NAME_RE = re.compile(r"[A-Za-z][A-Za-z0-9]*")
_KEY_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*")
_INT_RE = re.compile(r"-?[0-9]+")
_WS = " \t\r"


class ParseMode(str, Enum):
    STRICT = "strict"
    LENIENT = "lenient"


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


class DiagnosticCode(str, Enum):
    MALFORMED_INVOCATION = "malformed-invocation"
    EMPTY_NAME = "empty-name"
    MALFORMED_PARAMETER = "malformed-parameter"
    TRAILING_GARBAGE = "trailing-garbage"
    DUPLICATE_PARAMETER_KEY = "duplicate-parameter-key"
    UNKNOWN_DECORATOR = "unknown-decorator"
    UNKNOWN_PARAMETER = "unknown-parameter"
    MISSING_REQUIRED_PARAMETER = "missing-required-parameter"
    VALUE_OUT_OF_RANGE = "value-out-of-range"
    VALUE_NOT_IN_ENUMERATION = "value-not-in-enumeration"
    BOTH_SCOPE_MARKERS = "both-scope-markers"
    EMPTY_CHAT_SCOPE = "empty-chat-scope"
    INACTIVE_CLEAR_TARGET = "inactive-clear-target"
    CONFLICT_ADAPTATION = "conflict-adaptation"


class ValueKind(str, Enum):
    INTEGER = "integer"
    IDENTIFIER = "identifier"
    STRING = "string"
    DECORATOR = "decorator"


@dataclass(frozen=True)
class Span:
    """Byte range of a token inside the scanned message."""

    line: int
    start: int
    end: int


@dataclass(frozen=True)
class ParamValue:
    kind: ValueKind
    text: str

    def as_int(self) -> int:
        if self.kind is not ValueKind.INTEGER:
            raise ValueError(f"parameter value '{self.text}' is not an integer")
        return int(self.text)


@dataclass(frozen=True)
class Parameter:
    key: str
    value: ParamValue


@dataclass(frozen=True)
class DecoratorInvocation:
    name: str
    params: tuple[Parameter, ...]
    span: Span = field(compare=False, default=Span(0, 0, 0))
    raw: str = field(compare=False, default="")


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: Severity
    code: DiagnosticCode
    span: Span
    message: str


@dataclass(frozen=True)
class ScanResult:
    invocations: tuple[DecoratorInvocation, ...]
    body: str
    diagnostics: tuple[ParseDiagnostic, ...]

    def __iter__(self):
        # allows: invocations, body, diagnostics = scan_message(...)
        return iter((self.invocations, self.body, self.diagnostics))


def _byte_len(text: str) -> int:
    return len(text.encode("utf-8"))


class _LineParser:
    """Recursive-descent parser for a single head line."""

    def __init__(self, text: str, line_index: int, line_byte_start: int):
        self.text = text
        self.pos = 0
        self.line = line_index
        self.base = line_byte_start

    def _span(self, start: int, end: int) -> Span:
        s = self.base + _byte_len(self.text[:start])
        e = self.base + _byte_len(self.text[:end])
        return Span(self.line, s, e)

    def _fail(self, code: DiagnosticCode, message: str, start: int | None = None):
        raise InvocationSyntaxError(
            code.value, message, self._span(start if start is not None else self.pos, self.pos)
        )

    def _peek(self) -> str:
        return self.text[self.pos : self.pos + 1]

    def _skip_ws(self):
        while self._peek() in _WS and self._peek():
            self.pos += 1

    def _match(self, pattern: re.Pattern) -> str | None:
        m = pattern.match(self.text, self.pos)
        if m is None:
            return None
        self.pos = m.end()
        return m.group(0)

    def parse(self) -> DecoratorInvocation:
        self._skip_ws()
        ws_end = self.pos
        if not self.text.startswith("+++", self.pos):
            self._fail(DiagnosticCode.MALFORMED_INVOCATION, "head line does not start with '+++'")
        start = self.pos
        self.pos += 3
        name = self._match(_NAME_RE)
        if name is None:
            self._fail(DiagnosticCode.EMPTY_NAME, "'+++' is not followed by a decorator name", start)
        params: list[Parameter] = []
        if self._peek() == "(":
            self.pos += 1
            params = self._parse_params(name)
            if self._peek() != ")":
                self._fail(
                    DiagnosticCode.MALFORMED_INVOCATION,
                    f"unbalanced parenthesis in '+++{name}(...'",
                    start,
                )
            self.pos += 1
        end = self.pos
        self._skip_ws()
        if self.pos != len(self.text):
            self._fail(
                DiagnosticCode.TRAILING_GARBAGE,
                f"unexpected text after '+++{name}': {self.text[self.pos:]!r}",
            )
        seen: set[str] = set()
        for p in params:
            if p.value.kind is ValueKind.DECORATOR:
                continue  # positional Clear targets share the synthetic 'target' key
            if p.key in seen:
                self._fail(
                    DiagnosticCode.DUPLICATE_PARAMETER_KEY,
                    f"duplicate parameter key '{p.key}'",
                    start,
                )
            seen.add(p.key)
        raw = self.text[ws_end:end]
        return DecoratorInvocation(
            name=name, params=tuple(params), span=self._span(ws_end, end), raw=raw
        )

    def _parse_params(self, name: str) -> list[Parameter]:
        positional_ok = name.lower() == "clear"
        params: list[Parameter] = []
        self._skip_ws()
        if self._peek() == ")":
            return params
        while True:
            params.append(self._parse_param(positional_ok))
            self._skip_ws()
            if self._peek() == ",":
                self.pos += 1
                self._skip_ws()
                continue
            return params

    def _parse_param(self, positional_ok: bool) -> Parameter:
        if self.text.startswith("+++", self.pos):
            if not positional_ok:
                self._fail(
                    DiagnosticCode.MALFORMED_PARAMETER,
                    "decorator-name arguments are only accepted by Clear",
                )
            self.pos += 3
            target = self._match(_NAME_RE)
            if target is None:
                self._fail(DiagnosticCode.EMPTY_NAME, "'+++' target is not followed by a name")
            return Parameter("target", ParamValue(ValueKind.DECORATOR, target))
        key_start = self.pos
        key = self._match(_KEY_RE)
        if key is None:
            self._fail(DiagnosticCode.MALFORMED_PARAMETER, "expected a parameter")
        self._skip_ws()
        if self._peek() != "=":
            if positional_ok:
                return Parameter("target", ParamValue(ValueKind.DECORATOR, key))
            self._fail(
                DiagnosticCode.MALFORMED_PARAMETER,
                f"parameter '{key}' is missing '=value'",
                key_start,
            )
        self.pos += 1
        self._skip_ws()
        return Parameter(key, self._parse_value(key))

    def _parse_value(self, key: str) -> ParamValue:
        ch = self._peek()
        if ch == '"':
            return ParamValue(ValueKind.STRING, self._parse_quoted(key))
        number = _INT_RE.match(self.text, self.pos)
        if number is not None and not _KEY_RE.match(self.text, number.end()):
            self.pos = number.end()
            return ParamValue(ValueKind.INTEGER, str(int(number.group(0))))
        ident = self._match(_KEY_RE)
        if ident is not None:
            return ParamValue(ValueKind.IDENTIFIER, ident)
        self._fail(
            DiagnosticCode.MALFORMED_PARAMETER,
            f"parameter '{key}' has no valid value",
        )

    def _parse_quoted(self, key: str) -> str:
        quote_start = self.pos
        self.pos += 1
        out: list[str] = []
        while True:
            ch = self._peek()
            if ch == "":
                self._fail(
                    DiagnosticCode.MALFORMED_PARAMETER,
                    f"unterminated quote in parameter '{key}'",
                    quote_start,
                )
            if ch == '"':
                self.pos += 1
                return "".join(out)
            if ch == "\\":
                esc = self.text[self.pos + 1 : self.pos + 2]
                if esc not in ('"', "\\"):
                    self._fail(
                        DiagnosticCode.MALFORMED_PARAMETER,
                        f"invalid escape '\\{esc}' in parameter '{key}'",
                        quote_start,
                    )
                out.append(esc)
                self.pos += 2
                continue
            out.append(ch)
            self.pos += 1


def parse_invocation(line: str, *, line_index: int = 0, line_byte_start: int = 0) -> DecoratorInvocation:
    """Parse one head line into an invocation.

    Raises :class:`InvocationSyntaxError` on malformed input. ``+++Name()``
    and ``+++Name`` are equivalent.
    """
    return _LineParser(line, line_index, line_byte_start).parse()


def _is_head_line(content: str) -> bool:
    return content.lstrip(" \t").startswith("+++")


def _is_blank(content: str) -> bool:
    return content.strip(_WS) == ""


def scan_message(text: str, mode: ParseMode = ParseMode.STRICT) -> ScanResult:
    """Split a message into head-block invocations and body text.

    Strict mode raises :class:`MessageParseError` on the first malformed head
    line; lenient mode demotes that line and everything after it to body text
    and records a warning. The body is byte-identical to the input minus the
    head lines and at most one separating blank line.
    """
    if not isinstance(mode, ParseMode):
        mode = ParseMode(mode)
    lines = text.split("\n")
    invocations: list[DecoratorInvocation] = []
    diagnostics: list[ParseDiagnostic] = []
    head_count = 0
    byte_offset = 0
    for index, content in enumerate(lines):
        if not _is_head_line(content):
            break
        try:
            invocations.append(parse_invocation(content, line_index=index, line_byte_start=byte_offset))
        except InvocationSyntaxError as exc:
            span = exc.span or Span(index, byte_offset, byte_offset + _byte_len(content))
            diag = ParseDiagnostic(
                severity=Severity.ERROR if mode is ParseMode.STRICT else Severity.WARNING,
                code=DiagnosticCode(exc.code),
                span=span,
                message=str(exc),
            )
            if mode is ParseMode.STRICT:
                raise MessageParseError([diag]) from exc
            diagnostics.append(diag)
            break
        head_count = index + 1
        byte_offset += _byte_len(content) + 1
    body_lines = lines[head_count:]
    if head_count and body_lines and _is_blank(body_lines[0]):
        body_lines = body_lines[1:]
    return ScanResult(tuple(invocations), "\n".join(body_lines), tuple(diagnostics))


def _render_value(value: ParamValue) -> str:
    if value.kind is ValueKind.STRING:
        escaped = value.text.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    return value.text


def render_invocation(inv: DecoratorInvocation) -> str:
    """Render the canonical text form: ``+++Name`` or ``+++Name(k=v, ...)``."""
    if not inv.params:
        return f"+++{inv.name}"
    parts = []
    for p in inv.params:
        if p.value.kind is ValueKind.DECORATOR:
            parts.append(f"+++{p.value.text}")
        else:
            parts.append(f"{p.key}={_render_value(p.value)}")
    return f"+++{inv.name}({', '.join(parts)})"
