"""Exception types shared across the engine."""

from __future__ import annotations


class DecoratorError(Exception):
    """Base class for every error raised by this package."""


class InvocationSyntaxError(DecoratorError):
    """A single head line could not be parsed.

    ``code`` is a :class:`~promptdec.syntax.DiagnosticCode` value; ``span``
    locates the problem inside the source line/message.
    """

    def __init__(self, code: str, message: str, span=None):
        super().__init__(message)
        self.code = code
        self.span = span


class MessageParseError(DecoratorError):
    """Strict-mode scan failure; carries the offending diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        first = self.diagnostics[0].message if self.diagnostics else "parse error"
        super().__init__(first)


class UnknownDecoratorError(DecoratorError):
    def __init__(self, name: str):
        super().__init__(f"unknown decorator '{name}'")
        self.name = name


class ValidationError(DecoratorError):
    """An invocation does not conform to its registry schema."""

    def __init__(self, code: str, message: str, decorator: str = ""):
        super().__init__(message)
        self.code = code
        self.decorator = decorator


class ExtensionError(DecoratorError):
    """Base class for extension-loading failures."""


class NameCollisionError(ExtensionError):
    pass


class MalformedExtensionError(ExtensionError):
    pass


class IllegalKindError(ExtensionError):
    pass


class BothScopeMarkersError(DecoratorError):
    def __init__(self):
        super().__init__(
            "ChatScope and MessageScope cannot be combined in one message"
        )


class HardConflictError(DecoratorError):
    def __init__(self, first: str, second: str):
        super().__init__(f"decorators '{first}' and '{second}' are declared incompatible")
        self.pair = (first, second)


class TemplateInstantiationError(DecoratorError):
    def __init__(self, decorator: str, placeholder: str):
        super().__init__(
            f"template for '{decorator}' references unknown placeholder '{placeholder}'"
        )
        self.decorator = decorator
        self.placeholder = placeholder


class SessionStoreError(DecoratorError):
    pass


class ConfigError(DecoratorError):
    pass
