"""Word-level tokenizer with camelCase sub-tokens.

Text is segmented into newlines, runs of spaces, ``//``, identifier words,
integer literals and single characters.  Identifier words are split at
lower-to-upper case boundaries (``sendMessage`` -> ``send`` + ``Message``),
so an identifier's first sub-token is always a verbatim prefix of it.  Any
piece missing from the vocabulary is spelled out character by character,
which makes ``decode(encode(x)) == x`` for every text over the alphabet.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ..errors import UnknownCharacter
from ..lang import KEYWORDS

UNK = "<unk>"
NEWLINE = "\n"
MAX_SPACE_RUN = 16
ALPHABET = frozenset(chr(c) for c in range(0x20, 0x7F)) | {"\t", "\r", "\n"}

_SEGMENT_RE = re.compile(r"\n| {1,%d}|//|[A-Za-z_][A-Za-z0-9_]*|[0-9]+|." % MAX_SPACE_RUN, re.DOTALL)
_CAMEL_RE = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")
_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def split_identifier(word: str) -> list[str]:
    """camelCase split; the pieces concatenate back to ``word``."""
    return _CAMEL_RE.split(word)


def segment(text: str) -> list[str]:
    """Split text into vocabulary-candidate pieces (lossless)."""
    pieces: list[str] = []
    for m in _SEGMENT_RE.finditer(text):
        piece = m.group()
        if piece[0] not in ALPHABET:
            raise UnknownCharacter(piece[0], m.start())
        if _WORD_RE.fullmatch(piece):
            pieces.extend(split_identifier(piece))
        else:
            pieces.append(piece)
    return pieces


@dataclass(frozen=True)
class Vocab:
    tokens: tuple[str, ...]
    id_of: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.tokens[:2] != (UNK, NEWLINE):
            raise ValueError("vocab must start with the UNK and NEWLINE tokens")
        id_of = {t: i for i, t in enumerate(self.tokens)}
        if len(id_of) != len(self.tokens):
            raise ValueError("duplicate tokens in vocab")
        object.__setattr__(self, "id_of", id_of)

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def unk_id(self) -> int:
        return 0

    @property
    def newline_id(self) -> int:
        return 1

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "Vocab":
        """Base alphabet, space runs, keywords and every piece of ``texts``."""
        pieces = set(ALPHABET) | {" " * k for k in range(1, MAX_SPACE_RUN + 1)} | set(KEYWORDS) | {"//"}
        for text in texts:
            pieces.update(segment(text))
        pieces.discard(NEWLINE)
        pieces.discard(UNK)
        return cls((UNK, NEWLINE, *sorted(pieces)))


class Tokenizer:
    def __init__(self, vocab: Vocab):
        self.vocab = vocab
        self.newline_id = vocab.newline_id
        self.ident_mask = np.array(
            [t != UNK and bool(_WORD_RE.fullmatch(t)) and t not in KEYWORDS for t in vocab.tokens], dtype=bool
        )

    @property
    def vocab_size(self) -> int:
        return self.vocab.size

    def encode(self, text: str) -> list[int]:
        id_of = self.vocab.id_of
        ids: list[int] = []
        for piece in segment(text):
            tid = id_of.get(piece)
            if tid is not None:
                ids.append(tid)
            else:
                ids.extend(id_of[ch] for ch in piece)
        return ids

    def decode(self, ids: Iterable[int]) -> str:
        tokens = self.vocab.tokens
        return "".join("" if i == 0 else tokens[i] for i in ids)

    def token_text(self, tid: int) -> str:
        return self.vocab.tokens[tid]

    def first_subtoken(self, identifier: str) -> int:
        return self.encode(identifier)[0]

    def is_ident_piece(self, tid: int) -> bool:
        return bool(self.ident_mask[tid])
