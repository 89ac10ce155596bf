"""Static analysis of subject-language files.

Everything here works on a :class:`SourceFile` plus an optional symbol index
(see :mod:`stallkit.repo_index`).  Queries at a cursor parse only the text
before the cursor, so unfinished files are the normal case rather than an
error: the parser recovers the header, every complete declaration, and the
statement the cursor sits in.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from pathlib import PurePosixPath
from typing import Iterable, Mapping, NamedTuple

from .errors import SubjectSyntaxError, UnresolvedReceiver
from .lang import BUILTIN_TYPES, IDENT, INT, KEYWORD, PUNCT, STRING, Token, lex

PROVENANCE_TAGS = ("local", "param", "field", "imported_class", "member_of_receiver")


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class SourceFile:
    path: str
    text: str
    line_starts: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        starts = [0]
        starts.extend(i + 1 for i, ch in enumerate(self.text) if ch == "\n")
        object.__setattr__(self, "line_starts", tuple(starts))

    def offset(self, line: int, col: int) -> int:
        return self.line_starts[line] + col

    def position(self, offset: int) -> tuple[int, int]:
        line = bisect.bisect_right(self.line_starts, offset) - 1
        return line, offset - self.line_starts[line]


@dataclass(frozen=True)
class MethodSignature:
    name: str
    return_type: str
    params: tuple[tuple[str, str], ...]
    rendered: str

    @classmethod
    def build(cls, name: str, return_type: str, params: Iterable[tuple[str, str]]) -> "MethodSignature":
        params = tuple((n, t) for n, t in params)
        inner = ", ".join(f"{t} {n}" for n, t in params)
        return cls(name, return_type, params, f"{return_type} {name}({inner})")


@dataclass(frozen=True)
class ClassSummary:
    name: str
    signature: str
    field_names: tuple[str, ...] = ()
    field_types: tuple[str, ...] = ()
    methods: tuple[MethodSignature, ...] = ()

    def member_names(self) -> list[str]:
        seen: dict[str, None] = dict.fromkeys(self.field_names)
        for m in self.methods:
            seen.setdefault(m.name)
        return list(seen)

    def member_type(self, name: str) -> str | None:
        for fname, ftype in zip(self.field_names, self.field_types):
            if fname == name:
                return ftype
        for m in self.methods:
            if m.name == name:
                return m.return_type
        return None


@dataclass(frozen=True)
class ModuleSummary:
    module_id: str
    classes: tuple[ClassSummary, ...]


@dataclass(frozen=True, eq=True)
class ValidTokenSet:
    identifiers: frozenset[str]
    provenance: Mapping[str, str] = field(default_factory=dict, compare=False)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "ValidTokenSet":
        prov: dict[str, str] = {}
        for name, tag in pairs:
            prov.setdefault(name, tag)
        return cls(frozenset(prov), prov)

    def __contains__(self, name: object) -> bool:
        return name in self.identifiers

    def __iter__(self):
        return iter(sorted(self.identifiers))

    def __len__(self) -> int:
        return len(self.identifiers)

    def __hash__(self) -> int:
        return hash(self.identifiers)


class Diagnostic(NamedTuple):
    position: int
    message: str


@dataclass(frozen=True)
class StaticCheckReport:
    passed: bool
    diagnostics: tuple[Diagnostic, ...] = ()

    @classmethod
    def of(cls, diagnostics: Iterable[Diagnostic]) -> "StaticCheckReport":
        diags = tuple(diagnostics)
        return cls(not diags, diags)


def _builtin(name: str, methods=()) -> ClassSummary:
    return ClassSummary(name, f"class {name}", methods=tuple(methods))


BUILTIN_CLASSES: dict[str, ClassSummary] = {
    "str": _builtin("str", [MethodSignature.build("trim", "str", ()), MethodSignature.build("len", "int", ())]),
    "int": _builtin("int"),
    "bool": _builtin("bool"),
    "void": _builtin("void"),
}


# ---------------------------------------------------------------------------
# Syntax tree (only what the queries need)


@dataclass(frozen=True)
class Atom:
    kind: str  # "ident" | "int" | "string"
    text: str
    pos: int
    args: tuple["Chain", ...] | None = None


@dataclass(frozen=True)
class Link:
    name: str
    pos: int
    args: tuple["Chain", ...] | None = None


@dataclass(frozen=True)
class Chain:
    head: Atom
    links: tuple[Link, ...] = ()


@dataclass(frozen=True)
class LocalDecl:
    type_name: str
    name: str
    pos: int
    value: Chain


@dataclass(frozen=True)
class ExprStmt:
    value: Chain


@dataclass(frozen=True)
class ReturnStmt:
    pos: int
    value: Chain | None


@dataclass
class _MethodNode:
    name: str
    pos: int
    return_type: str
    params: list[tuple[str, str]]
    stmts: list = field(default_factory=list)
    closed: bool = False


@dataclass
class _ClassNode:
    name: str
    pos: int
    fields: list[tuple[str, str, int]] = field(default_factory=list)
    methods: list[_MethodNode] = field(default_factory=list)
    closed: bool = False


@dataclass
class Outline:
    """What the parser recovered from a (possibly unfinished) file."""

    package: str | None = None
    imports: list[tuple[str, int]] = field(default_factory=list)
    classes: list[_ClassNode] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)
    open_class: _ClassNode | None = None
    open_method: _MethodNode | None = None
    tail: list[Token] = field(default_factory=list)
    incomplete: bool = False
    header_done: bool = False

    @property
    def context(self) -> str:
        if self.open_method is not None and not self.open_method.closed:
            return "body"
        if self.open_class is not None and not self.open_class.closed:
            return "class"
        return "top" if self.header_done else "header"


# ---------------------------------------------------------------------------
# Parser

STRICT, RECOVER, PREFIX = "strict", "recover", "prefix"


class _Incomplete(Exception):
    """Input ended where the grammar needed more tokens."""


class _Parser:
    def __init__(self, tokens: list[Token], end_pos: int, mode: str, require_package: bool = True):
        self.toks = tokens
        self.i = 0
        self.end_pos = end_pos
        self.mode = mode
        self.require_package = require_package
        self.out = Outline()

    # token helpers

    def peek(self, k: int = 0) -> Token | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def _fail(self, expected: str):
        tok = self.peek()
        if tok is None:
            if self.mode == PREFIX:
                raise _Incomplete(expected)
            raise SubjectSyntaxError(self.end_pos, expected, "end of input")
        raise SubjectSyntaxError(tok.pos, expected, tok.text)

    def next(self, expected: str) -> Token:
        tok = self.peek()
        if tok is None:
            self._fail(expected)
        self.i += 1
        return tok

    def punct(self, text: str) -> Token:
        tok = self.peek()
        if tok is None or not tok.is_punct(text):
            self._fail(f"'{text}'")
        self.i += 1
        return tok

    def keyword(self, text: str) -> Token:
        tok = self.peek()
        if tok is None or not tok.is_kw(text):
            self._fail(f"'{text}'")
        self.i += 1
        return tok

    def ident(self, what: str = "identifier") -> Token:
        tok = self.peek()
        if tok is None or tok.kind != IDENT:
            self._fail(what)
        self.i += 1
        return tok

    def at_punct(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.is_punct(text)

    # grammar

    def parse_file(self) -> Outline:
        try:
            self._header()
            self.out.header_done = True
            self._classes()
        except _Incomplete:
            self.out.incomplete = True
        return self.out

    def _header(self):
        tok = self.peek()
        if tok is not None and tok.is_kw("package"):
            self.i += 1
            self.out.package = self._qname()
            self.punct(";")
        elif self.require_package:
            self._fail("'package'")
        while (tok := self.peek()) is not None and tok.is_kw("import"):
            self.i += 1
            start = self.peek()
            qname = self._qname()
            self.punct(";")
            self.out.imports.append((qname, start.pos))

    def _qname(self) -> str:
        parts = [self.ident("qualified name").text]
        while self.at_punct("."):
            self.i += 1
            parts.append(self.ident("qualified name").text)
        return ".".join(parts)

    def _classes(self):
        if self.mode == STRICT and self.peek() is None:
            self._fail("'class'")
        while (tok := self.peek()) is not None:
            if tok.is_kw("class"):
                mark = self.i
                try:
                    self._class_decl()
                except SubjectSyntaxError as err:
                    if self.mode == STRICT:
                        raise
                    self._note(err)
                    self.i = mark + 1
                    self._skip_to_class()
            else:
                err = SubjectSyntaxError(tok.pos, "'class'", tok.text)
                if self.mode == STRICT:
                    raise err
                self._note(err)
                self._skip_to_class()

    def _class_decl(self):
        self.keyword("class")
        name_tok = self.ident("class name")
        self.punct("{")
        cls = _ClassNode(name_tok.text, name_tok.pos)
        self.out.classes.append(cls)
        self.out.open_class = cls
        while True:
            tok = self.peek()
            if tok is None:
                self._fail("'}'")
            if tok.is_punct("}"):
                self.i += 1
                cls.closed = True
                return
            mark = self.i
            try:
                self._member(cls)
            except SubjectSyntaxError as err:
                if self.mode == STRICT:
                    raise
                self._note(err)
                self.i = mark
                self._skip_member()
                if self.peek() is None:
                    if self.mode == PREFIX:
                        raise _Incomplete("'}'") from None
                    self._note(SubjectSyntaxError(self.end_pos, "'}'", "end of input"))
                    return

    def _type(self) -> Token:
        tok = self.peek()
        if tok is not None and (tok.kind == IDENT or (tok.kind == KEYWORD and tok.text in BUILTIN_TYPES)):
            self.i += 1
            return tok
        self._fail("type")

    def _member(self, cls: _ClassNode):
        type_tok = self._type()
        name_tok = self.ident("member name")
        tok = self.next("';' or '('")
        if tok.is_punct(";"):
            cls.fields.append((name_tok.text, type_tok.text, name_tok.pos))
            return
        if not tok.is_punct("("):
            raise SubjectSyntaxError(tok.pos, "';' or '('", tok.text)
        params: list[tuple[str, str]] = []
        if not self.at_punct(")"):
            while True:
                ptype = self._type()
                pname = self.ident("parameter name")
                params.append((pname.text, ptype.text))
                if self.at_punct(","):
                    self.i += 1
                    continue
                break
        self.punct(")")
        method = _MethodNode(name_tok.text, name_tok.pos, type_tok.text, params)
        self.punct("{")
        cls.methods.append(method)
        self.out.open_method = method
        self._body(method)

    def _body(self, method: _MethodNode):
        while True:
            tok = self.peek()
            if tok is None:
                self._fail("'}'")
            if tok.is_punct("}"):
                self.i += 1
                method.closed = True
                return
            start = self.i
            try:
                method.stmts.append(self.statement())
            except _Incomplete:
                self.out.tail = self.toks[start:]
                raise
            except SubjectSyntaxError as err:
                if self.mode == STRICT:
                    raise
                self._note(err)
                self.i = start
                if not self._skip_stmt():
                    if self.mode == PREFIX:
                        self.out.tail = self.toks[start:]
                        raise _Incomplete("';'") from None
                    return

    def statement(self):
        tok = self.peek()
        if tok.is_kw("return"):
            self.i += 1
            value = None if self.at_punct(";") else self.expr()
            self.punct(";")
            return ReturnStmt(tok.pos, value)
        nxt = self.peek(1)
        if (tok.kind == KEYWORD and tok.text in BUILTIN_TYPES) or (
            tok.kind == IDENT and nxt is not None and nxt.kind == IDENT
        ):
            type_tok = self._type()
            name_tok = self.ident("local name")
            self.punct("=")
            value = self.expr()
            self.punct(";")
            return LocalDecl(type_tok.text, name_tok.text, name_tok.pos, value)
        value = self.expr()
        self.punct(";")
        return ExprStmt(value)

    def expr(self) -> Chain:
        tok = self.next("expression")
        if tok.kind == IDENT:
            head = Atom("ident", tok.text, tok.pos, self._call_args())
        elif tok.kind == INT:
            head = Atom("int", tok.text, tok.pos)
        elif tok.kind == STRING:
            head = Atom("string", tok.text, tok.pos)
        else:
            raise SubjectSyntaxError(tok.pos, "expression", tok.text)
        links = []
        while self.at_punct("."):
            self.i += 1
            name = self.ident("member name")
            links.append(Link(name.text, name.pos, self._call_args()))
        return Chain(head, tuple(links))

    def _call_args(self):
        if not self.at_punct("("):
            return None
        self.i += 1
        args = []
        if not self.at_punct(")"):
            while True:
                args.append(self.expr())
                if self.at_punct(","):
                    self.i += 1
                    continue
                break
        self.punct(")")
        return tuple(args)

    # recovery

    def _note(self, err: SubjectSyntaxError):
        found = f" (found {err.found!r})" if err.found is not None else ""
        self.out.diagnostics.append(Diagnostic(err.position, f"expected {err.expected}{found}"))

    def _skip_stmt(self) -> bool:
        """Skip past the next ';' at nesting depth 0; stop before a closing
        '}'.  Returns False if the input ran out first."""
        depth = 0
        while (tok := self.peek()) is not None:
            if tok.is_punct("("):
                depth += 1
            elif tok.is_punct(")"):
                depth = max(0, depth - 1)
            elif tok.is_punct(";") and depth == 0:
                self.i += 1
                return True
            elif tok.is_punct("}"):
                return True
            self.i += 1
        return False

    def _skip_member(self):
        depth = 0
        while (tok := self.peek()) is not None:
            if tok.is_punct("{"):
                depth += 1
            elif tok.is_punct("}"):
                if depth == 0:
                    return
                depth -= 1
                if depth == 0:
                    self.i += 1
                    return
            elif tok.is_punct(";") and depth == 0:
                self.i += 1
                return
            self.i += 1

    def _skip_to_class(self):
        while (tok := self.peek()) is not None and not tok.is_kw("class"):
            self.i += 1


def parse_outline(text: str, mode: str = PREFIX, *, require_package: bool = True) -> Outline:
    """Parse ``text`` into an :class:`Outline`.

    ``strict`` raises on the first error, ``recover`` records body errors as
    diagnostics and keeps going, and ``prefix`` additionally treats the end
    of ``text`` as a cursor rather than an error.
    """
    tokens = lex(text)
    return _Parser(tokens, len(text), mode, require_package).parse_file()


def _summarize(node: _ClassNode, *, strict: bool) -> ClassSummary:
    seen_fields: set[str] = set()
    names, types = [], []
    for name, type_name, pos in node.fields:
        if name in seen_fields:
            if strict:
                raise SubjectSyntaxError(pos, "a field name not already declared", name)
            continue
        seen_fields.add(name)
        names.append(name)
        types.append(type_name)
    seen_methods: set[tuple[str, int]] = set()
    methods = []
    for m in node.methods:
        key = (m.name, len(m.params))
        if key in seen_methods:
            if strict:
                raise SubjectSyntaxError(m.pos, "a method name/arity not already declared", m.name)
            continue
        seen_methods.add(key)
        methods.append(MethodSignature.build(m.name, m.return_type, m.params))
    return ClassSummary(node.name, f"class {node.name}", tuple(names), tuple(types), tuple(methods))


def _module_id(package: str | None, path: str, classes: list[_ClassNode]) -> str:
    stem = PurePosixPath(path).stem if path else (classes[0].name if classes else "")
    return f"{package}.{stem}" if package else stem


def parse_file(file: SourceFile) -> ModuleSummary:
    """Summarize every class, field and method signature declared in ``file``.

    Raises :class:`SubjectSyntaxError` on the first syntax error.
    """
    outline = parse_outline(file.text, STRICT)
    seen: set[str] = set()
    classes = []
    for node in outline.classes:
        if node.name in seen:
            raise SubjectSyntaxError(node.pos, "a class name not already declared", node.name)
        seen.add(node.name)
        classes.append(_summarize(node, strict=True))
    return ModuleSummary(_module_id(outline.package, file.path, outline.classes), tuple(classes))


def recover_file(file: SourceFile) -> tuple[Outline, ModuleSummary]:
    """Parse with statement-level recovery.

    Header errors still raise; anything after the header is recovered and
    reported through ``outline.diagnostics``.
    """
    outline = parse_outline(file.text, RECOVER)
    seen: set[str] = set()
    classes = []
    for node in outline.classes:
        if node.name in seen:
            outline.diagnostics.append(Diagnostic(node.pos, f"duplicate class {node.name}"))
            continue
        seen.add(node.name)
        classes.append(_summarize(node, strict=False))
    return outline, ModuleSummary(_module_id(outline.package, file.path, outline.classes), tuple(classes))


def parse_method_signature(rendered: str) -> MethodSignature:
    """Parse a rendered signature such as ``str trim(str x)``."""
    tokens = lex(rendered)
    p = _Parser(tokens, len(rendered), STRICT)
    type_tok = p._type()
    name = p.ident("method name")
    p.punct("(")
    params = []
    if not p.at_punct(")"):
        while True:
            ptype = p._type()
            pname = p.ident("parameter name")
            params.append((pname.text, ptype.text))
            if p.at_punct(","):
                p.i += 1
                continue
            break
    p.punct(")")
    if p.peek() is not None:
        p._fail("end of signature")
    return MethodSignature.build(name.text, type_tok.text, params)


def extract_imports(file: SourceFile) -> list[str]:
    """Qualified names imported by ``file``, in source order with duplicates.

    Only the header has to be well formed; the body may be unfinished.
    """
    tokens = lex(file.text, lenient=True)
    p = _Parser(tokens, len(file.text), PREFIX, require_package=False)
    try:
        p._header()
    except _Incomplete:
        pass
    return [q for q, _ in p.out.imports]


# ---------------------------------------------------------------------------
# Scope and types


class _Scope:
    """Names and types visible at the end of a prefix outline."""

    def __init__(self, outline: Outline, index):
        self.index = index
        self.package = outline.package
        self.imports = [q for q, _ in outline.imports]
        self.own = {c.name: _summarize(c, strict=False) for c in outline.classes}
        self.in_body = outline.context == "body"
        cls = outline.open_class if outline.context in ("body", "class") else None
        self.fields: dict[str, str] = {}
        self.own_methods: dict[str, str] = {}
        if cls is not None:
            for name, type_name, _ in cls.fields:
                self.fields.setdefault(name, type_name)
            for m in cls.methods:
                self.own_methods.setdefault(m.name, m.return_type)
        self.params: dict[str, str] = {}
        self.locals: dict[str, str] = {}
        if self.in_body:
            method = outline.open_method
            self.params = {n: t for n, t in method.params}
            for stmt in method.stmts:
                if isinstance(stmt, LocalDecl):
                    self.locals[stmt.name] = stmt.type_name

    # classes

    def _index_modules(self) -> Mapping[str, ClassSummary]:
        return self.index.modules if self.index is not None else {}

    def imported_classes(self) -> dict[str, str]:
        """Simple name -> qualified name for imports present in the index."""
        found = {}
        modules = self._index_modules()
        for q in self.imports:
            if q in modules:
                found.setdefault(q.rsplit(".", 1)[-1], q)
        return found

    def resolve_class(self, name: str, origin: str | None = None):
        """Look up a type name; returns ``(summary, origin_qname)`` or None.

        ``origin`` is the qualified name of the class whose declaration used
        the type name (None for the file being edited).
        """
        if name in BUILTIN_CLASSES:
            return BUILTIN_CLASSES[name], None
        modules = self._index_modules()
        if origin is None:
            if name in self.own:
                return self.own[name], None
            imports, package = self.imports, self.package
        else:
            path = self.index.file_of.get(origin)
            imports = self.index.imports_of.get(path, ())
            package = origin.rsplit(".", 1)[0] if "." in origin else None
        for q in imports:
            if q.rsplit(".", 1)[-1] == name and q in modules:
                return modules[q], q
        if package:
            q = f"{package}.{name}"
            if q in modules:
                return modules[q], q
        return None

    # expressions

    def var_type(self, name: str, extra: Mapping[str, str] | None = None) -> str | None:
        for table in (extra or {}, self.locals, self.params, self.fields):
            if name in table:
                return table[name]
        return None

    def type_chain(self, chain: Chain, extra: Mapping[str, str] | None = None):
        head = chain.head
        if head.kind == "int":
            current = (BUILTIN_CLASSES["int"], None)
        elif head.kind == "string":
            current = (BUILTIN_CLASSES["str"], None)
        elif head.args is None:
            vtype = self.var_type(head.text, extra)
            current = self.resolve_class(vtype) if vtype is not None else self.resolve_class(head.text)
        else:
            current = self.resolve_class(head.text)
            if current is None and head.text in self.own_methods:
                current = self.resolve_class(self.own_methods[head.text])
        for link in chain.links:
            if current is None:
                return None
            summary, origin = current
            member_type = summary.member_type(link.name)
            if member_type is None:
                return None
            current = self.resolve_class(member_type, origin)
        return current

    def all_members(self) -> set[str]:
        names: set[str] = set()
        for summary in BUILTIN_CLASSES.values():
            names.update(summary.member_names())
        for summary in self._index_modules().values():
            names.update(summary.member_names())
        return names

    def plain_names(self, extra: Mapping[str, str] | None = None) -> list[tuple[str, str]]:
        pairs = [(n, "local") for n in (extra or {})]
        pairs += [(n, "local") for n in self.locals]
        pairs += [(n, "param") for n in self.params]
        pairs += [(n, "field") for n in self.fields]
        pairs += [(n, "imported_class") for n in self.imported_classes()]
        return pairs


def _receiver_start(tokens: list[Token], dot: int) -> int | None:
    """Index of the first token of the postfix chain ending just before
    ``tokens[dot]`` (a '.'), or None when no chain precedes it."""
    i = dot - 1
    while True:
        if i < 0:
            return None
        tok = tokens[i]
        if tok.is_punct(")"):
            depth = 0
            j = i
            while j >= 0:
                if tokens[j].is_punct(")"):
                    depth += 1
                elif tokens[j].is_punct("("):
                    depth -= 1
                    if depth == 0:
                        break
                j -= 1
            if j <= 0 or tokens[j - 1].kind != IDENT:
                return None
            i = j - 1
            tok = tokens[i]
        elif tok.kind not in (IDENT, INT, STRING):
            return None
        if i >= 2 and tokens[i - 1].is_punct(".") and tok.kind == IDENT:
            i -= 2
            continue
        return i


def _parse_chain(tokens: list[Token]) -> Chain | None:
    if not tokens:
        return None
    p = _Parser(tokens, tokens[-1].end, STRICT)
    try:
        chain = p.expr()
    except SubjectSyntaxError:
        return None
    return chain if p.peek() is None else None


def _member_access(tail: list[Token], prefix_len: int) -> tuple[list[Token], str] | None:
    """If the cursor follows ``receiver.`` (optionally with a partly typed
    member name), return the receiver tokens and their source text."""
    if not tail:
        return None
    if tail[-1].is_punct("."):
        dot = len(tail) - 1
    elif tail[-1].kind == IDENT and tail[-1].end == prefix_len and len(tail) >= 2 and tail[-2].is_punct("."):
        dot = len(tail) - 2
    else:
        return None
    start = _receiver_start(tail, dot)
    if start is None:
        return [], ""
    recv = tail[start:dot]
    return recv, "".join(t.text for t in recv)


def _members_of(scope: _Scope, recv_tokens: list[Token], recv_text: str, extra=None, *, strict: bool):
    chain = _parse_chain(recv_tokens)
    resolved = scope.type_chain(chain, extra) if chain is not None else None
    if resolved is None:
        if strict:
            raise UnresolvedReceiver(recv_text)
        return scope.all_members(), False
    return set(resolved[0].member_names()), True


def _prefix_outline(file: SourceFile, cursor: int) -> Outline:
    if not 0 <= cursor <= len(file.text):
        raise ValueError(f"cursor {cursor} outside file of length {len(file.text)}")
    return parse_outline(file.text[:cursor], PREFIX, require_package=False)


def valid_identifiers_at(file: SourceFile, cursor: int, index=None, *, strict: bool = False) -> ValidTokenSet:
    """Identifiers that may legally appear at ``cursor``.

    Right after ``receiver.`` this is the receiver type's fields and
    methods.  Otherwise it is the locals declared so far in the enclosing
    method, its parameters, the enclosing class's fields and the imported
    classes found in ``index``.  An untypeable receiver raises
    :class:`UnresolvedReceiver` when ``strict`` is set and otherwise yields
    every member of every known class.
    """
    outline = _prefix_outline(file, cursor)
    scope = _Scope(outline, index)
    access = _member_access(outline.tail, cursor) if scope.in_body else None
    if access is not None:
        members, _ = _members_of(scope, access[0], access[1], strict=strict)
        return ValidTokenSet.from_pairs((m, "member_of_receiver") for m in sorted(members))
    return ValidTokenSet.from_pairs(scope.plain_names())


def check_line(file: SourceFile, cursor: int, candidate_line: str, index=None) -> StaticCheckReport:
    """Statically check ``candidate_line`` spliced into ``file`` at ``cursor``.

    Passes when the spliced text is a viable continuation of the statement
    at the cursor (it may stop mid-statement) and every identifier the
    candidate introduces resolves by the same rules as
    :func:`valid_identifiers_at`.
    """
    try:
        outline = _prefix_outline(file, cursor)
    except SubjectSyntaxError as err:
        return StaticCheckReport.of([Diagnostic(err.position, f"prefix does not lex: {err}")])
    if outline.context != "body":
        return StaticCheckReport.of([Diagnostic(cursor, "cursor is not inside a method body")])
    tail_start = outline.tail[0].pos if outline.tail else cursor
    spliced = file.text[:cursor] + candidate_line

    diags: list[Diagnostic] = []
    try:
        spliced_outline = parse_outline(spliced, PREFIX, require_package=False)
    except SubjectSyntaxError as err:
        return StaticCheckReport.of([Diagnostic(err.position, f"syntax: {err}")])
    for d in spliced_outline.diagnostics:
        if d.position >= tail_start:
            diags.append(Diagnostic(d.position, f"syntax: {d.message}"))
    if diags:
        return StaticCheckReport.of(diags)

    scope = _Scope(outline, index)
    tokens = lex(spliced[tail_start:])
    tokens = [Token(t.kind, t.text, t.pos + tail_start) for t in tokens]
    extra: dict[str, str] = {}
    pending: tuple[str, str] | None = None
    stmt_start = True
    skip: set[int] = set()
    for j, tok in enumerate(tokens):
        if tok.kind == PUNCT and tok.text in ";{}":
            if pending is not None:
                extra[pending[0]] = pending[1]
                pending = None
            stmt_start = True
            continue
        if stmt_start:
            stmt_start = False
            nxt = tokens[j + 1] if j + 1 < len(tokens) else None
            is_type = tok.kind == IDENT or (tok.kind == KEYWORD and tok.text in BUILTIN_TYPES)
            if is_type and nxt is not None and nxt.kind == IDENT:
                pending = (nxt.text, tok.text)
                skip.add(j + 1)
                if tok.kind == IDENT and tok.pos >= cursor and scope.resolve_class(tok.text) is None:
                    diags.append(Diagnostic(tok.pos, f"unknown type {tok.text}"))
                continue
        if tok.kind != IDENT or tok.pos < cursor or j in skip:
            continue
        if j > 0 and tokens[j - 1].is_punct("."):
            start = _receiver_start(tokens, j - 1)
            recv = tokens[start : j - 1] if start is not None else []
            members, _ = _members_of(scope, recv, "".join(t.text for t in recv), extra, strict=False)
            if tok.text not in members:
                diags.append(Diagnostic(tok.pos, f"unknown member {tok.text}"))
        elif tok.text not in {n for n, _ in scope.plain_names(extra)}:
            diags.append(Diagnostic(tok.pos, f"unknown identifier {tok.text}"))
    return StaticCheckReport.of(diags)
