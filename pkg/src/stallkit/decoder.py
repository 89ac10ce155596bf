"""Greedy, logit-masked and beam-search decoding over any backend.

Masking replaces the logits of invalid tokens with ``-inf`` before the
argmax, so after the softmax every invalid token has probability exactly
zero and the valid ones are renormalized among themselves.  It is applied
only at trigger points: the step right after a member-access ``.``, where
it constrains the first sub-token of the member name.
"""

from __future__ import annotations

import contextlib
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .analyzer import ValidTokenSet
from .errors import NoValidTokens

MaskProvider = Callable[[Sequence[int]], "np.ndarray | None"]


@dataclass(frozen=True)
class Candidate:
    ids: tuple[int, ...]
    logprob: float
    text: str
    finished: bool = True  # False when cut off at max_new_tokens


@dataclass(frozen=True)
class TriggerState:
    active: bool = False
    receiver: str | None = None

    @classmethod
    def after(cls, token_text: str) -> "TriggerState":
        return cls(active=token_text == ".")


@dataclass(frozen=True)
class StepRecord:
    step: int
    token: int
    triggered: bool
    mask_size: int  # number of valid first sub-tokens; 0 means fallback
    in_mask: bool | None  # None when no mask was applied


@dataclass
class DecodeTrace:
    steps: list[StepRecord] = field(default_factory=list)

    @property
    def triggered(self) -> list[StepRecord]:
        return [s for s in self.steps if s.triggered]

    @property
    def violations(self) -> int:
        return sum(1 for s in self.steps if s.in_mask is False)

    @property
    def fallbacks(self) -> int:
        return sum(1 for s in self.steps if s.triggered and s.mask_size == 0)


def mask_from_valid(valid: Iterable[str], backend) -> np.ndarray:
    """Boolean vector over the vocabulary: True for the first sub-token of
    each valid identifier.  An all-False mask means nothing is valid."""
    mask = np.zeros(backend.vocab_size, dtype=bool)
    for name in valid:
        ids = backend.encode(name)
        if ids:
            mask[ids[0]] = True
    return mask


def apply_mask(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.where(mask, logits, -np.inf)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    top = np.max(logits)
    shifted = logits - top
    with np.errstate(divide="ignore"):
        return shifted - math.log(np.exp(shifted).sum())


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    masked = apply_mask(np.asarray(logits, dtype=float), mask)
    e = np.exp(masked - masked.max())
    return e / e.sum()


def masked_argmax(logits: np.ndarray, mask: np.ndarray) -> int:
    """Index of the largest logit among masked-in tokens (lowest id on ties)."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise NoValidTokens("mask has no valid token")
    return int(np.argmax(apply_mask(np.asarray(logits, dtype=float), mask)))


def _timed(timings, name):
    if timings is None:
        return contextlib.nullcontext()
    return timings.span(name)


class _Stepper:
    """Shared per-step logic: logits, optional trigger mask, log-probs."""

    def __init__(self, backend, prompt_ids, mask_provider, timings, trace):
        if len(prompt_ids) == 0:
            raise ValueError("prompt_ids must be non-empty")
        self.backend = backend
        self.prompt = list(prompt_ids)
        self.mask_provider = mask_provider
        self.timings = timings
        self.trace = trace
        self._texts: dict[int, str] = {}
        # <unk> decodes to nothing; proposing it would let blank pseudo-tokens
        # crowd real continuations out of the beam.
        self.unk_id = getattr(backend, "unk_id", None)

    def text_of(self, tid: int) -> str:
        if tid not in self._texts:
            with _timed(self.timings, "inference"):
                self._texts[tid] = self.backend.token_text(tid)
        return self._texts[tid]

    def initial_trigger(self) -> TriggerState:
        return TriggerState.after(self.text_of(self.prompt[-1]))

    def logprobs(self, out: Sequence[int], trigger: TriggerState):
        with _timed(self.timings, "inference"):
            logits = np.array(self.backend.next_logits(self.prompt + list(out)), dtype=float)
        if self.unk_id is not None:
            logits[self.unk_id] = -np.inf
        mask = None
        mask_size = 0
        if self.mask_provider is not None and trigger.active:
            mask = self.mask_provider(out)
            mask_size = int(mask.sum()) if mask is not None else 0
            if mask_size == 0:
                mask = None
            else:
                logits = apply_mask(logits, mask)
        return log_softmax(logits), mask, mask_size

    def record(self, step, tid, trigger, mask, mask_size):
        if self.trace is not None:
            in_mask = None if mask is None else bool(mask[tid])
            self.trace.steps.append(StepRecord(step, tid, trigger.active and self.mask_provider is not None, mask_size, in_mask))

    def decode(self, ids) -> str:
        with _timed(self.timings, "inference"):
            return self.backend.decode(list(ids))


def generate(
    backend,
    prompt_ids: Sequence[int],
    *,
    max_new_tokens: int = 64,
    mask_provider: MaskProvider | None = None,
    timings=None,
    trace: DecodeTrace | None = None,
) -> Candidate:
    """Greedy decoding up to the first NEWLINE (excluded) or the token cap.

    ``mask_provider(generated_ids)`` is consulted only at trigger points; a
    None or all-False result leaves that step unmasked.
    """
    st = _Stepper(backend, prompt_ids, mask_provider, timings, trace)
    newline = backend.newline_id
    trigger = st.initial_trigger()
    out: list[int] = []
    total = 0.0
    finished = False
    for step in range(max_new_tokens):
        logp, mask, mask_size = st.logprobs(out, trigger)
        tid = int(np.argmax(logp))
        st.record(step, tid, trigger, mask, mask_size)
        total += float(logp[tid])
        if tid == newline:
            finished = True
            break
        out.append(tid)
        trigger = TriggerState.after(st.text_of(tid))
    return Candidate(tuple(out), total, st.decode(out), finished)


def beam_search(
    backend,
    prompt_ids: Sequence[int],
    *,
    beam_width: int = 3,
    n_best: int | None = None,
    max_new_tokens: int = 64,
    mask_provider: MaskProvider | None = None,
    timings=None,
    trace: DecodeTrace | None = None,
) -> list[Candidate]:
    """Beam search with per-candidate NEWLINE termination.

    Each live beam proposes its ``beam_width`` best next tokens; the best
    ``beam_width`` proposals survive, and those that are NEWLINE become
    finished candidates (their score includes the NEWLINE step).  Search
    stops when no live beam can beat the ``n_best``-th finished candidate.
    Results are sorted by descending log-probability, then by text.
    """
    n_best = n_best or beam_width
    st = _Stepper(backend, prompt_ids, mask_provider, timings, trace)
    newline = backend.newline_id
    live: list[tuple[float, tuple[int, ...], TriggerState]] = [(0.0, (), st.initial_trigger())]
    finished: list[tuple[float, tuple[int, ...], bool]] = []
    for step in range(max_new_tokens):
        proposals = []
        for score, out, trig in live:
            logp, mask, mask_size = st.logprobs(out, trig)
            order = np.argsort(-logp, kind="stable")[:beam_width]
            for tid in order.tolist():
                if not np.isfinite(logp[tid]):
                    continue
                st.record(step, tid, trig, mask, mask_size)
                proposals.append((score + float(logp[tid]), out, tid))
        proposals.sort(key=lambda p: (-p[0], p[1] + (p[2],)))
        live = []
        for rank, (score, out, tid) in enumerate(proposals):
            if tid == newline:
                if rank < beam_width:
                    finished.append((score, out, True))
                continue
            live.append((score, out + (tid,), TriggerState.after(st.text_of(tid))))
            if len(live) == beam_width:
                break
        if not live:
            break
        if len(finished) >= n_best:
            kth = sorted((f[0] for f in finished), reverse=True)[n_best - 1]
            if live[0][0] <= kth:
                break
    else:
        finished.extend((score, out, False) for score, out, _ in live)
    cands = [Candidate(out, score, st.decode(out), done) for score, out, done in finished]
    cands.sort(key=lambda c: (-c.logprob, c.text, c.ids))
    return cands[:n_best]


def perturb_valid_set(
    valid: ValidTokenSet,
    drop_rate: float,
    noise_rate: float,
    noise_pool: Iterable[str],
    seed: int,
) -> ValidTokenSet:
    """Emulate imprecise analysis: drop each identifier with ``drop_rate``
    and add ``ceil(noise_rate * |valid|)`` identifiers drawn from
    ``noise_pool`` (excluding the valid ones)."""
    if not (0.0 <= drop_rate <= 1.0 and 0.0 <= noise_rate <= 1.0):
        raise ValueError("rates must lie in [0, 1]")
    rng = random.Random(seed)
    names = sorted(valid.identifiers)
    kept = [n for n in names if rng.random() >= drop_rate]
    pool = sorted(set(noise_pool) - valid.identifiers)
    n_noise = min(math.ceil(noise_rate * len(names)), len(pool))
    noise = rng.sample(pool, n_noise) if n_noise else []
    pairs = [(n, valid.provenance.get(n, "member_of_receiver")) for n in kept]
    pairs += [(n, "member_of_receiver") for n in sorted(noise)]
    return ValidTokenSet.from_pairs(pairs)
