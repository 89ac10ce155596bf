"""Sliding-window snippet store and Jaccard top-k retrieval (the RAG baseline)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .lang import PUNCT, lex

WINDOW_LINES = 20
STRIDE = 10


@dataclass(frozen=True)
class Window:
    path: str
    start_line: int
    end_line: int  # inclusive
    text: str
    token_set: frozenset[str]

    def overlaps(self, path: str, start: int, end: int) -> bool:
        return self.path == path and self.start_line <= end and start <= self.end_line


def normalize_tokens(text: str) -> frozenset[str]:
    """Lower-cased lexer tokens with punctuation dropped, as a set."""
    return frozenset(t.text.lower() for t in lex(text, lenient=True) if t.kind != PUNCT)


def window_spans(n_lines: int, size: int = WINDOW_LINES, stride: int = STRIDE) -> list[tuple[int, int]]:
    """Inclusive ``(start, end)`` line spans; starts at 0, stride, 2*stride ..."""
    return [(s, min(s + size, n_lines) - 1) for s in range(0, n_lines, stride)]


def build_windows(repo, size: int = WINDOW_LINES, stride: int = STRIDE) -> list[Window]:
    windows = []
    for f in repo.files:
        lines = f.text.splitlines()
        for start, end in window_spans(len(lines), size, stride):
            text = "\n".join(lines[start : end + 1])
            windows.append(Window(f.path, start, end, text, normalize_tokens(text)))
    return windows


def jaccard(a: frozenset[str] | set[str], b: frozenset[str] | set[str]) -> float:
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def query_tokens(prefix: str, n_lines: int = WINDOW_LINES) -> frozenset[str]:
    """Tokens of the last ``n_lines`` lines of the in-file prefix."""
    return normalize_tokens("\n".join(prefix.splitlines()[-n_lines:]))


def retrieve(
    windows: Sequence[Window],
    query: Iterable[str],
    k: int = 3,
    exclude: tuple[str, int, int] | None = None,
) -> list[tuple[Window, float]]:
    """Top-``k`` windows by Jaccard similarity to ``query``.

    ``exclude = (path, first_line, last_line)`` removes every window that
    overlaps that region before ranking.  Ties go to the smaller
    ``(path, start_line)``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    q = frozenset(query)
    scored = [
        (w, jaccard(w.token_set, q))
        for w in windows
        if exclude is None or not w.overlaps(*exclude)
    ]
    scored.sort(key=lambda ws: (-ws[1], ws[0].path, ws[0].start_line))
    return scored[:k]
