"""Exception types shared across the toolkit."""

from __future__ import annotations


class StallkitError(Exception):
    """Base class for all toolkit errors."""


class SubjectSyntaxError(StallkitError):
    """Subject-language source failed to lex or parse.

    ``position`` is a character offset into the parsed text and
    ``expected`` describes what the parser wanted to see there.
    """

    def __init__(self, position: int, expected: str, found: str | None = None):
        self.position = position
        self.expected = expected
        self.found = found
        msg = f"at offset {position}: expected {expected}"
        if found is not None:
            msg += f", found {found!r}"
        super().__init__(msg)


class UnresolvedReceiver(StallkitError):
    def __init__(self, receiver: str):
        self.receiver = receiver
        super().__init__(f"cannot determine the type of receiver {receiver!r}")


class EmptyRepository(StallkitError):
    pass


class DuplicateSymbol(StallkitError):
    def __init__(self, qname: str, first: str, second: str):
        self.qname = qname
        self.paths = (first, second)
        super().__init__(f"{qname} declared in both {first} and {second}")


class UnknownImport(StallkitError):
    def __init__(self, qname: str, diagnostics=()):
        self.qname = qname
        self.diagnostics = tuple(diagnostics)
        msg = f"no indexed class for import {qname}"
        if self.diagnostics:
            msg += f" ({len(self.diagnostics)} diagnostics in its file)"
        super().__init__(msg)


class UnknownCharacter(StallkitError):
    def __init__(self, char: str, position: int):
        self.char = char
        self.position = position
        super().__init__(f"character {char!r} at offset {position} is outside the tokenizer alphabet")


class EmptyCorpus(StallkitError):
    pass


class BackendUnavailable(StallkitError):
    pass


class NoValidTokens(StallkitError):
    pass


class MalformedRecord(StallkitError):
    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}")


class ConfigError(StallkitError):
    pass
