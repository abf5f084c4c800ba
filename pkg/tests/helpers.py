"""Shared enumeration helpers for schema-conforming invocations."""

from __future__ import annotations

from promptdec import (
    DecoratorInvocation,
    Parameter,
    ParamKind,
    ParamValue,
    Registry,
    ValueKind,
)

STRING_SAMPLES = ("Systems Thinking", 'with "quotes" and \\slashes\\', "x")


def conforming_invocations(registry: Registry) -> list[DecoratorInvocation]:
    """Every catalog entry instantiated at its schema's interesting points:
    each enum choice, integers at {min, default, max}, sample strings, and the
    bare form whenever all parameters are optional."""
    out: list[DecoratorInvocation] = []
    for definition in registry.catalog():
        name = definition.canonical_name
        if name == "Clear":
            out.append(DecoratorInvocation(name=name, params=()))
            out.append(
                DecoratorInvocation(
                    name=name,
                    params=(Parameter("target", ParamValue(ValueKind.DECORATOR, "Reasoning")),),
                )
            )
            out.append(
                DecoratorInvocation(
                    name=name,
                    params=(
                        Parameter("target", ParamValue(ValueKind.DECORATOR, "Reasoning")),
                        Parameter("target", ParamValue(ValueKind.DECORATOR, "Tone")),
                    ),
                )
            )
            continue
        if not definition.param_schema:
            out.append(DecoratorInvocation(name=name, params=()))
            continue
        if all(not spec.required for spec in definition.param_schema):
            out.append(DecoratorInvocation(name=name, params=()))
        for spec in definition.param_schema:
            if spec.kind is ParamKind.ENUM:
                values = [ParamValue(ValueKind.IDENTIFIER, choice) for choice in spec.choices]
            elif spec.kind is ParamKind.INT:
                points = {spec.min_value, spec.default, spec.max_value}
                values = [
                    ParamValue(ValueKind.INTEGER, str(point))
                    for point in sorted(v for v in points if v is not None)
                ]
            else:
                values = [ParamValue(ValueKind.STRING, sample) for sample in STRING_SAMPLES]
            for value in values:
                out.append(
                    DecoratorInvocation(name=name, params=(Parameter(spec.key, value),))
                )
    return out
