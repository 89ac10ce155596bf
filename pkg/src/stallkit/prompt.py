"""Prompt assembly: dependency contexts, retrieved snippets and the in-file prefix."""

from __future__ import annotations

import contextlib
import zlib
from dataclasses import dataclass, fields, replace
from typing import Sequence

from .analyzer import SourceFile, ValidTokenSet, extract_imports, valid_identifiers_at
from .decoder import perturb_valid_set
from .errors import ConfigError, SubjectSyntaxError, UnknownImport
from .repo_index import resolve_import
from .retriever import Window, query_tokens, retrieve

FILE_DEPS, TOKEN_DEPS, RETRIEVED, IN_FILE = "FileDeps", "TokenDeps", "Retrieved", "InFile"
SEGMENT_ORDER = (FILE_DEPS, TOKEN_DEPS, RETRIEVED, IN_FILE)
TOKEN_DEPS_HEADER = "// valid identifiers here:"


@dataclass(frozen=True)
class StrategyConfig:
    prompt_f: bool = False
    prompt_t: bool = False
    decode: bool = False
    post: bool = False
    rag: bool = False
    in_file_tokens: int = 2000
    per_crossfile_tokens: int = 3000
    retrieved_k: int = 3
    max_new_tokens: int = 64
    beam_width: int = 3
    allow_slow: bool = False
    drop_rate: float = 0.0
    noise_rate: float = 0.0
    perturb_seed: int = 0

    def __post_init__(self):
        if self.decode and self.post and not self.allow_slow:
            raise ConfigError(
                "decode+post runs beam search with an analyzer call per beam and step; "
                "this is too expensive to run by default (pass allow_slow to enable it)"
            )
        for name in ("in_file_tokens", "per_crossfile_tokens", "retrieved_k", "max_new_tokens", "beam_width"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if not (0.0 <= self.drop_rate <= 1.0 and 0.0 <= self.noise_rate <= 1.0):
            raise ConfigError("perturbation rates must lie in [0, 1]")

    @property
    def perturbed(self) -> bool:
        return self.drop_rate > 0 or self.noise_rate > 0

    @property
    def label(self) -> str:
        parts = []
        if self.rag:
            parts.append("RAG")
        if self.prompt_f:
            parts.append("F")
        if self.prompt_t:
            parts.append("T")
        if self.decode:
            parts.append("D")
        if self.post:
            parts.append("P")
        if not parts:
            return "In-file"
        if len(parts) == 1:
            return {"RAG": "RAG", "F": "Prompt-F", "T": "Prompt-T", "D": "Decode", "P": "Post"}[parts[0]]
        return "+".join(parts)

    @classmethod
    def from_label(cls, label: str, **overrides) -> "StrategyConfig":
        """Parse ``In-file``, ``Prompt-F``, ``RAG+F+D``, ``decode,post`` ..."""
        names = {
            "rag": "rag", "f": "prompt_f", "prompt-f": "prompt_f", "prompt_f": "prompt_f",
            "t": "prompt_t", "prompt-t": "prompt_t", "prompt_t": "prompt_t",
            "d": "decode", "decode": "decode", "p": "post", "post": "post",
        }
        flags = {}
        text = label.strip().lower()
        if text not in ("in-file", "infile", "in_file", ""):
            for part in text.replace(",", "+").split("+"):
                part = part.strip()
                if part not in names:
                    raise ConfigError(f"unknown strategy component {part!r} in {label!r}")
                flags[names[part]] = True
        return cls(**{**flags, **overrides})

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def with_(self, **changes) -> "StrategyConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class Segment:
    kind: str
    text: str
    token_count: int


@dataclass(frozen=True)
class PromptBundle:
    segments: tuple[Segment, ...]
    total_tokens: int

    @property
    def text(self) -> str:
        return "\n".join(s.text for s in self.segments)

    def kinds(self) -> list[str]:
        return [s.kind for s in self.segments]

    def segment(self, kind: str) -> Segment | None:
        for s in self.segments:
            if s.kind == kind:
                return s
        return None


def render_file_deps(imports: Sequence[str], index, skipped: list | None = None) -> str:
    """One comment block per resolvable import: module, class signature,
    field names, method signatures.  Unresolvable imports are skipped (and
    appended to ``skipped`` if given)."""
    blocks = []
    seen = set()
    for qname in imports:
        if qname in seen:
            continue
        seen.add(qname)
        try:
            cls = resolve_import(index, qname)
        except UnknownImport as err:
            if skipped is not None:
                skipped.append(err)
            continue
        module = qname.rpartition(".")[0] or qname
        lines = [f"// module {module}", f"// {cls.signature}"]
        lines += [f"//   field {name}" for name in cls.field_names]
        lines += [f"//   {m.rendered}" for m in cls.methods]
        blocks.append("\n".join(lines))
    return "\n".join(blocks)


def render_token_deps(valid: ValidTokenSet | Sequence[str], budget: int | None = None, count=None) -> str:
    """``// valid identifiers here: a, b`` with identifiers sorted.

    With a ``budget`` and a token counter ``count(text)``, identifiers are
    appended while the line still fits.
    """
    names = sorted(valid)
    if budget is None or count is None:
        return f"{TOKEN_DEPS_HEADER} {', '.join(names)}" if names else TOKEN_DEPS_HEADER
    text = TOKEN_DEPS_HEADER
    used = count(text)
    for i, name in enumerate(names):
        piece = f" {name}" if i == 0 else f", {name}"
        cost = count(piece)
        if used + cost > budget:
            break
        text += piece
        used += cost
    return text


def _keep_first(backend, text: str, budget: int) -> tuple[str, int]:
    ids = backend.encode(text)
    if len(ids) <= budget:
        return text, len(ids)
    return backend.decode(ids[:budget]), budget


def _keep_last(backend, text: str, budget: int) -> tuple[str, int]:
    ids = backend.encode(text)
    if len(ids) <= budget:
        return text, len(ids)
    return backend.decode(ids[-budget:]), budget


def render_retrieved(hits: Sequence[tuple[Window, float]]) -> str:
    blocks = []
    for w, _ in hits:
        lines = [f"// retrieved from {w.path}:{w.start_line}-{w.end_line}"]
        lines += [f"// {line}" if line else "//" for line in w.text.split("\n")]
        blocks.append("\n".join(lines))
    return "\n".join(blocks)


def perturb_seed_for(config: StrategyConfig, task_id: str, where: str) -> int:
    return zlib.crc32(f"{config.perturb_seed}:{task_id}:{where}".encode())


def assemble(task, config: StrategyConfig, index, windows, backend, *, timings=None, noise_pool=()) -> PromptBundle:
    """Build the prompt: FileDeps, TokenDeps, Retrieved (when enabled), InFile.

    The in-file prefix keeps its rightmost ``in_file_tokens`` tokens; each
    cross-file segment keeps its first ``per_crossfile_tokens`` tokens.
    """
    def span(name):
        return timings.span(name) if timings is not None else contextlib.nullcontext()

    file = SourceFile(task.file, task.prompt)
    cursor = len(task.prompt)
    budget = config.per_crossfile_tokens
    segments: list[Segment] = []

    if config.prompt_f:
        with span("analysis"):
            try:
                imports = extract_imports(file)
            except SubjectSyntaxError:
                imports = []
            text = render_file_deps(imports, index)
        with span("inference"):
            text, n = _keep_first(backend, text, budget)
        segments.append(Segment(FILE_DEPS, text, n))

    if config.prompt_t:
        with span("analysis"):
            try:
                valid = valid_identifiers_at(file, cursor, index)
            except SubjectSyntaxError:
                valid = ValidTokenSet.from_pairs([])
            if config.perturbed:
                valid = perturb_valid_set(
                    valid, config.drop_rate, config.noise_rate, noise_pool, perturb_seed_for(config, task.task_id, "prompt")
                )
        with span("inference"):
            text = render_token_deps(valid, budget, lambda s: len(backend.encode(s)))
            n = len(backend.encode(text))
        segments.append(Segment(TOKEN_DEPS, text, n))

    if config.rag:
        with span("retrieval"):
            line = task.prompt.count("\n")
            hits = retrieve(windows, query_tokens(task.prompt), config.retrieved_k, exclude=(task.file, line, line))
            text = render_retrieved(hits)
        with span("inference"):
            text, n = _keep_first(backend, text, budget)
        segments.append(Segment(RETRIEVED, text, n))

    with span("inference"):
        text, n = _keep_last(backend, task.prompt, config.in_file_tokens)
        segments.append(Segment(IN_FILE, text, n))
        bundle_text = "\n".join(s.text for s in segments)
        total = len(backend.encode(bundle_text))
    return PromptBundle(tuple(segments), total)
