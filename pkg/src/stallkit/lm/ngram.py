"""Add-alpha n-gram model with stupid backoff, and the backend built on it."""

from __future__ import annotations

import json
import math
import threading
from collections import OrderedDict, defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from ..errors import EmptyCorpus
from ..lang import identifiers_in
from .tokenizer import Tokenizer, Vocab

BACKOFF = 0.4


@dataclass(eq=False)
class NGramModel:
    """``logit(t | ctx) = ln((c(ctx, t) + alpha) / (sum_t' c(ctx, t') + alpha K))``.

    The longest suffix of the context (up to ``order - 1`` tokens) that was
    seen in training is used; each backoff step adds ``ln 0.4``.
    """

    order: int
    alpha: float
    vocab: Vocab
    counts: dict[tuple[int, ...], dict[int, int]]
    _table: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.order < 2:
            raise ValueError("order must be at least 2")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        self._table = {}
        for ctx, nxt in self.counts.items():
            ids = np.fromiter(sorted(nxt), dtype=np.int64, count=len(nxt))
            cnt = np.array([nxt[i] for i in ids.tolist()], dtype=np.float64)
            self._table[ctx] = (ids, cnt, float(cnt.sum()))
        self._cached = lru_cache(maxsize=8192)(self._context_logits)

    @property
    def size(self) -> int:
        return self.vocab.size

    def count(self, ctx: Sequence[int], token: int) -> int:
        return self.counts.get(tuple(ctx), {}).get(token, 0)

    def context_used(self, ids: Sequence[int]) -> tuple[int, ...]:
        """Longest seen suffix of ``ids`` no longer than ``order - 1``."""
        top = min(self.order - 1, len(ids))
        for k in range(top, -1, -1):
            ctx = tuple(ids[len(ids) - k :]) if k else ()
            if ctx in self._table:
                return ctx
        return ()

    def has_full_context(self, ids: Sequence[int]) -> bool:
        k = self.order - 1
        return len(ids) >= k and tuple(ids[len(ids) - k :]) in self._table

    def _context_logits(self, ctx: tuple[int, ...], depth: int) -> np.ndarray:
        K = self.size
        nxt, cnt, total = self._table[ctx]
        denom = total + self.alpha * K
        vec = np.full(K, math.log(self.alpha / denom))
        vec[nxt] = np.log((cnt + self.alpha) / denom)
        vec += depth * math.log(BACKOFF)
        vec.flags.writeable = False
        return vec

    def logits(self, ids: Sequence[int]) -> np.ndarray:
        ctx = self.context_used(ids)
        depth = min(self.order - 1, len(ids)) - len(ctx)
        return self._cached(ctx, depth)

    # serialization

    def to_json(self) -> str:
        counts = {
            " ".join(map(str, ctx)): {str(t): c for t, c in sorted(nxt.items())}
            for ctx, nxt in sorted(self.counts.items())
        }
        return json.dumps(
            {"order": self.order, "alpha": self.alpha, "vocab": list(self.vocab.tokens), "counts": counts},
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "NGramModel":
        data = json.loads(text)
        counts = {
            tuple(int(x) for x in key.split()): {int(t): int(c) for t, c in nxt.items()}
            for key, nxt in data["counts"].items()
        }
        return cls(int(data["order"]), float(data["alpha"]), Vocab(tuple(data["vocab"])), counts)


def train_ngram(
    corpus: Iterable[str], n: int = 3, alpha: float = 0.1, *, vocab: Vocab | None = None
) -> NGramModel:
    """Count all contexts of length 0..n-1 over the tokenized corpus.

    Counting is commutative, so the model does not depend on text order.
    """
    texts = [t for t in corpus if t]
    if not texts:
        raise EmptyCorpus("training corpus is empty")
    vocab = vocab or Vocab.from_texts(texts)
    tok = Tokenizer(vocab)
    counts: dict[tuple[int, ...], dict[int, int]] = defaultdict(lambda: defaultdict(int))
    for text in texts:
        ids = tok.encode(text)
        for i, t in enumerate(ids):
            for k in range(0, min(n - 1, i) + 1):
                counts[tuple(ids[i - k : i])][t] += 1
    return NGramModel(n, alpha, vocab, {c: dict(v) for c, v in counts.items()})


def softmax(logits: np.ndarray) -> np.ndarray:
    finite = logits[np.isfinite(logits)]
    shift = finite.max() if finite.size else 0.0
    e = np.exp(logits - shift)
    return e / e.sum()


class NGramBackend:
    """Local backend: tokenizer plus n-gram logits, with context priming.

    A pure n-gram only sees the last ``order - 1`` tokens, so text prepended
    to the prompt could never influence it.  Priming gives it a channel:
    at an identifier start where the model had to back off (it has no
    specific evidence), a share ``priming`` of the identifier probability
    mass is moved onto identifiers that the prompt's comment lines mention
    but its code lines do not, in proportion to their own probability.
    With no such identifiers the output is the plain n-gram.
    """

    def __init__(self, model: NGramModel, priming: float = 0.8):
        if not 0.0 <= priming < 1.0:
            raise ValueError("priming must be in [0, 1)")
        self.model = model
        self.tokenizer = Tokenizer(model.vocab)
        self.priming = priming
        self._lock = threading.Lock()
        self._head_cache: OrderedDict[tuple[int, ...], tuple[frozenset[int], frozenset[int]]] = OrderedDict()

    # tokenizer surface

    @property
    def vocab_size(self) -> int:
        return self.tokenizer.vocab_size

    @property
    def newline_id(self) -> int:
        return self.tokenizer.newline_id

    @property
    def unk_id(self) -> int:
        return self.tokenizer.vocab.unk_id

    def encode(self, text: str) -> list[int]:
        return self.tokenizer.encode(text)

    def decode(self, ids: Sequence[int]) -> str:
        return self.tokenizer.decode(ids)

    def token_text(self, tid: int) -> str:
        return self.tokenizer.token_text(tid)

    # logits

    def next_logits(self, ids: Sequence[int]) -> np.ndarray:
        if len(ids) == 0:
            raise ValueError("next_logits needs a non-empty context")
        base = np.array(self.model.logits(ids))
        if self.priming == 0.0 or self.tokenizer.ident_mask[ids[-1]] or self.model.has_full_context(ids):
            return base
        primed = self.primed_ids(ids)
        if not primed:
            return base
        p = softmax(base)
        ident = self.tokenizer.ident_mask
        sel = np.fromiter(sorted(primed), dtype=np.int64, count=len(primed))
        mass = p[ident].sum()
        share = p[sel] / p[sel].sum()
        q = p.copy()
        q[ident] *= 1.0 - self.priming
        q[sel] += self.priming * mass * share
        return np.log(q)

    def primed_ids(self, ids: Sequence[int]) -> frozenset[int]:
        """First sub-tokens of identifiers named in comment lines of the
        context and absent from its code lines."""
        nl = self.newline_id
        cut = len(ids)
        while cut > 0 and ids[cut - 1] != nl:
            cut -= 1
        head = tuple(ids[:cut])
        with self._lock:
            cached = self._head_cache.get(head)
            if cached is not None:
                self._head_cache.move_to_end(head)
        if cached is None:
            cached = self._scan(self.decode(head))
            with self._lock:
                self._head_cache[head] = cached
                while len(self._head_cache) > 64:
                    self._head_cache.popitem(last=False)
        commented, coded = cached
        ident = self.tokenizer.ident_mask
        tail_firsts = {t for j, t in enumerate(ids[cut:], cut) if ident[t] and (j == 0 or not ident[ids[j - 1]])}
        return frozenset(commented - coded - tail_firsts)

    def _scan(self, text: str) -> tuple[frozenset[int], frozenset[int]]:
        commented: set[int] = set()
        coded: set[int] = set()
        first = self.tokenizer.first_subtoken
        for line in text.split("\n"):
            stripped = line.lstrip()
            if stripped.startswith("//"):
                commented.update(first(w) for w in identifiers_in(stripped[2:]))
            else:
                code, _, comment = stripped.partition("//")
                coded.update(first(w) for w in identifiers_in(code))
        return frozenset(commented), frozenset(coded)
