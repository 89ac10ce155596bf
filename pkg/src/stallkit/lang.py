"""Lexer for the subject language.

The language is a small Java-flavoured one: a package header, imports, and
classes holding fields and methods whose bodies are flat statement lists.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import SubjectSyntaxError

KEYWORDS = frozenset({"package", "import", "class", "return", "int", "str", "bool", "void"})
BUILTIN_TYPES = ("int", "str", "bool", "void")

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")

IDENT = "IDENT"
KEYWORD = "KEYWORD"
INT = "INT"
STRING = "STRING"
PUNCT = "PUNCT"

_ASCII_PUNCT = r"!#$%&'()*+,\-./:;<=>?@\[\\\]^`{|}~"

_TOKEN_RE = re.compile(
    rf"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<int>[0-9]+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<punct>[{_ASCII_PUNCT}])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True, slots=True)
class Token:
    kind: str
    text: str
    pos: int

    @property
    def end(self) -> int:
        return self.pos + len(self.text)

    def is_punct(self, text: str) -> bool:
        return self.kind == PUNCT and self.text == text

    def is_kw(self, text: str) -> bool:
        return self.kind == KEYWORD and self.text == text

    def __repr__(self) -> str:
        return f"{self.kind}({self.text!r}@{self.pos})"


def is_identifier(text: str) -> bool:
    return bool(IDENT_RE.fullmatch(text)) and text not in KEYWORDS


def lex(text: str, *, lenient: bool = False) -> list[Token]:
    """Split ``text`` into tokens, skipping whitespace and ``//`` comments.

    With ``lenient=True`` lexing stops quietly at the first character that
    cannot start a token instead of raising.
    """
    tokens: list[Token] = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if lenient:
                break
            if text[pos] == '"':
                raise SubjectSyntaxError(pos, "closing quote", "end of line")
            raise SubjectSyntaxError(pos, "a token", text[pos])
        kind = m.lastgroup
        value = m.group()
        if kind == "word":
            tokens.append(Token(KEYWORD if value in KEYWORDS else IDENT, value, pos))
        elif kind == "int":
            tokens.append(Token(INT, value, pos))
        elif kind == "string":
            tokens.append(Token(STRING, value, pos))
        elif kind == "punct":
            tokens.append(Token(PUNCT, value, pos))
        pos = m.end()
    return tokens


def identifiers_in(text: str) -> list[str]:
    """Identifiers in order of appearance; keywords (including the builtin
    type names) are dropped and duplicates kept."""
    return [t.text for t in lex(text, lenient=True) if t.kind == IDENT]
