from __future__ import annotations

import itertools
import math
import random

import numpy as np
import pytest

from stallkit.analyzer import ValidTokenSet
from stallkit.decoder import (
    DecodeTrace,
    apply_mask,
    beam_search,
    generate,
    log_softmax,
    mask_from_valid,
    masked_argmax,
    masked_softmax,
    perturb_valid_set,
)
from stallkit.errors import NoValidTokens
from stallkit.lm import NGramBackend, train_ngram

from conftest import TableBackend

NEG = -30.0


def scripted(tokens, sequence, prompt_len):
    """Backend whose argmax at generated position i is ``sequence[i]``."""

    def fn(ids):
        step = len(ids) - prompt_len
        logits = [0.0] * len(tokens)
        want = sequence[step] if step < len(sequence) else "\n"
        logits[tokens.index(want)] = 5.0
        return logits

    return TableBackend(tokens, fn)


# -- mask construction ------------------------------------------------------------


@pytest.fixture
def ngram_backend():
    return NGramBackend(train_ngram(["x.sendMessage(m);\nx.send(m);\ns.trim();\ns.len();\n"]))


def test_shared_first_subtoken(ngram_backend):
    mask = mask_from_valid({"send", "sendMessage"}, ngram_backend)
    assert mask.sum() == 1
    assert ngram_backend.token_text(int(np.flatnonzero(mask)[0])) == "send"


def test_empty_valid_set_gives_zero_mask(ngram_backend):
    assert not mask_from_valid(set(), ngram_backend).any()


def test_single_identifier_single_bit(ngram_backend):
    assert mask_from_valid({"trim"}, ngram_backend).sum() == 1


# -- masked argmax / softmax ----------------------------------------------------------


def test_masked_argmax_examples():
    assert masked_argmax(np.array([2.0, 5.0, 1.0]), np.array([1, 0, 1], dtype=bool)) == 0
    assert masked_argmax(np.array([2.0, 5.0, 1.0]), np.ones(3, dtype=bool)) == 1


def test_masked_argmax_empty_mask():
    with pytest.raises(NoValidTokens):
        masked_argmax(np.array([1.0, 2.0]), np.zeros(2, dtype=bool))


def test_masked_argmax_random_against_subset_max():
    rng = np.random.default_rng(0)
    for _ in range(100):
        k = int(rng.integers(2, 40))
        logits = rng.normal(size=k) * 3
        mask = rng.random(k) < 0.4
        if not mask.any():
            mask[int(rng.integers(k))] = True
        valid = [i for i in range(k) if mask[i]]
        oracle = max(valid, key=lambda i: (logits[i], -i))
        assert masked_argmax(logits, mask) == oracle


def test_masked_softmax_zero_outside_and_normalized():
    logits = np.array([1.0, 3.0, -2.0, 0.5])
    mask = np.array([True, False, True, True])
    p = masked_softmax(logits, mask)
    assert p[1] == 0.0
    assert abs(p.sum() - 1.0) < 1e-9
    assert np.isneginf(apply_mask(logits, mask)[1])


def test_log_softmax_matches_definition():
    logits = np.array([0.3, -1.2, 2.0])
    expected = logits - math.log(np.exp(logits).sum())
    assert np.allclose(log_softmax(logits), expected, atol=1e-12)


# -- greedy -----------------------------------------------------------------------------


TOKENS = ["<unk>", "\n", "return", " ", "x", ";", ".", "trim", "normalize", "s", "(", ")"]


def test_greedy_stops_at_newline():
    prompt = [TOKENS.index("x")]
    backend = scripted(TOKENS, ["return", " ", "x", ";", "\n"], len(prompt))
    cand = generate(backend, prompt)
    assert cand.text == "return x;" and cand.finished


def test_greedy_token_cap():
    prompt = [TOKENS.index("x")]
    backend = scripted(TOKENS, ["x"] * 65, len(prompt))
    cand = generate(backend, prompt, max_new_tokens=64)
    assert len(cand.ids) == 64 and not cand.finished


def test_dot_trigger_forces_valid_member():
    prompt = TableBackend(TOKENS, None).encode("s.")

    def fn(ids):
        logits = [0.0] * len(TOKENS)
        last = TOKENS[ids[-1]]
        if last == ".":
            logits[TOKENS.index("normalize")] = 6.0
            logits[TOKENS.index("trim")] = 2.0
        elif last in ("trim", "normalize"):
            logits[TOKENS.index("(")] = 5.0
        elif last == "(":
            logits[TOKENS.index(")")] = 5.0
        elif last == ")":
            logits[TOKENS.index(";")] = 5.0
        else:
            logits[TOKENS.index("\n")] = 5.0
        return logits

    backend = TableBackend(TOKENS, fn)
    assert generate(backend, prompt).text == "normalize();"
    trim_mask = mask_from_valid({"trim"}, backend)
    trace = DecodeTrace()
    cand = generate(backend, prompt, mask_provider=lambda out: trim_mask, trace=trace)
    assert cand.text == "trim();"
    assert len(trace.triggered) == 1 and trace.violations == 0
    # the stored log-probability uses the masked distribution at the trigger
    # step, where "trim" is the only valid token (log 1 = 0)
    ids, rest = list(prompt) + [cand.ids[0]], 0.0
    for t in list(cand.ids[1:]) + [backend.newline_id]:
        rest += float(log_softmax(backend.next_logits(ids))[t])
        ids.append(t)
    assert cand.logprob == pytest.approx(rest, abs=1e-12)


def test_empty_mask_falls_back_to_unmasked():
    prompt = TableBackend(TOKENS, None).encode("s.")
    backend = scripted(TOKENS, ["normalize", "\n"], len(prompt))
    trace = DecodeTrace()
    cand = generate(backend, prompt, mask_provider=lambda out: np.zeros(len(TOKENS), dtype=bool), trace=trace)
    assert cand.text == "normalize"
    assert trace.fallbacks == 1 and trace.violations == 0


def test_unk_is_never_emitted():
    def fn(ids):
        logits = [0.0] * len(TOKENS)
        logits[0] = 9.0  # <unk> would win
        logits[TOKENS.index("x")] = 3.0 if len(ids) < 3 else 0.0
        logits[1] = 1.0
        return logits

    backend = TableBackend(TOKENS, fn)
    backend.unk_id = 0
    cand = generate(backend, [TOKENS.index("s")])
    assert 0 not in cand.ids and cand.text == "xx"


# -- beam search -------------------------------------------------------------------------


ABN = ["\n", "A", "B"]


def random_tree_backend(seed, depth=2):
    """3-token vocab; after ``depth`` non-newline tokens only NEWLINE is likely."""
    rng = random.Random(seed)
    table = {}

    def fn(ids):
        out = tuple(ids[1:])
        if len(out) >= depth:
            return [0.0, NEG, NEG]
        if out not in table:
            table[out] = [rng.uniform(-2, 2) for _ in range(3)]
        return table[out]

    return TableBackend(ABN, fn)


def enumerate_paths(backend, prompt, depth=2):
    """Every finished path of length <= depth+1, with exact log-probability."""
    paths = []
    for n in range(depth + 1):
        for body in itertools.product([1, 2], repeat=n):
            ids = list(prompt)
            total = 0.0
            for t in list(body) + [0]:
                total += float(log_softmax(backend.next_logits(ids))[t])
                ids.append(t)
            paths.append((total, body))
    paths.sort(key=lambda p: (-p[0], "".join(ABN[i] for i in p[1])))
    return paths


@pytest.mark.parametrize("seed", range(8))
def test_beam_matches_exhaustive_enumeration(seed):
    backend = random_tree_backend(seed)
    prompt = [1]
    oracle = enumerate_paths(backend, prompt)
    cands = beam_search(backend, prompt, beam_width=9, n_best=3)
    assert [c.ids for c in cands] == [p[1] for p in oracle[:3]]
    for c, (lp, _) in zip(cands, oracle):
        assert c.logprob == pytest.approx(lp, abs=1e-9)


def test_beam_width_one_equals_greedy():
    for seed in range(10):
        backend = random_tree_backend(seed, depth=4)
        greedy = generate(backend, [1])
        (top,) = beam_search(backend, [1], beam_width=1)
        assert top.ids == greedy.ids
        assert top.logprob == pytest.approx(greedy.logprob, abs=1e-12)


def test_deterministic_backend_converges_to_greedy():
    prompt = [TOKENS.index("x")]
    backend = scripted(TOKENS, ["return", " ", "x", ";", "\n"], len(prompt))
    cands = beam_search(backend, prompt, beam_width=3)
    assert cands[0].text == generate(backend, prompt).text == "return x;"


def test_early_newline_candidate_is_kept_and_ranked():
    # NEWLINE is the second-best first token; the greedy path continues
    def fn(ids):
        out = ids[1:]
        if not out:
            return [1.0, 1.5, NEG]
        if len(out) == 1:
            return [-1.0, NEG, 1.0]
        return [5.0, NEG, NEG]

    backend = TableBackend(ABN, fn)
    cands = beam_search(backend, [1], beam_width=3)
    texts = [c.text for c in cands]
    assert "" in texts and "AB" in texts
    assert [c.logprob for c in cands] == sorted((c.logprob for c in cands), reverse=True)


def test_logprob_bookkeeping_recomputed():
    backend = random_tree_backend(3, depth=3)
    for c in beam_search(backend, [1], beam_width=3):
        ids, total = [1], 0.0
        for t in list(c.ids) + ([0] if c.finished else []):
            total += float(log_softmax(backend.next_logits(ids))[t])
            ids.append(t)
        assert c.logprob == pytest.approx(total, abs=1e-9)


def test_beam_truncates_at_cap():
    backend = TableBackend(ABN, lambda ids: [NEG, 1.0, 0.5])
    cands = beam_search(backend, [1], beam_width=2, max_new_tokens=5)
    assert all(not c.finished and len(c.ids) == 5 for c in cands)


# -- perturbation -----------------------------------------------------------------------------


VALID = ValidTokenSet.from_pairs([(n, "member_of_receiver") for n in ["alpha", "beta", "gamma", "delta"]])
POOL = ["zeta", "eta", "theta", "iota", "kappa", "alpha"]


def test_perturb_identity():
    assert perturb_valid_set(VALID, 0.0, 0.0, POOL, 1) == VALID


def test_perturb_drop_all():
    assert len(perturb_valid_set(VALID, 1.0, 0.0, POOL, 1)) == 0
    noisy = perturb_valid_set(VALID, 1.0, 0.5, POOL, 1)
    assert len(noisy) == 2 and set(noisy) <= set(POOL) - set(VALID)


def test_perturb_is_seeded():
    a = perturb_valid_set(VALID, 0.3, 0.5, POOL, 42)
    assert a == perturb_valid_set(VALID, 0.3, 0.5, POOL, 42)
    outs = {frozenset(perturb_valid_set(VALID, 0.5, 0.5, POOL, s)) for s in range(20)}
    assert len(outs) > 1


def test_perturb_rejects_bad_rates():
    with pytest.raises(ValueError):
        perturb_valid_set(VALID, 1.5, 0.0, POOL, 0)
