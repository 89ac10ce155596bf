from __future__ import annotations

import pytest

from stallkit.analyzer import SourceFile, ValidTokenSet
from stallkit.errors import ConfigError
from stallkit.lm import NGramBackend, train_ngram
from stallkit.prompt import (
    FILE_DEPS,
    IN_FILE,
    RETRIEVED,
    TOKEN_DEPS,
    StrategyConfig,
    assemble,
    perturb_seed_for,
    render_file_deps,
    render_retrieved,
    render_token_deps,
)
from stallkit.repo_index import RepoSnapshot, build_index
from stallkit.retriever import build_windows
from stallkit.tasks import CompletionTask, cursor_of

from conftest import APP_MAIN, UTIL_S


@pytest.fixture
def backend(small_repo):
    return NGramBackend(train_ngram([f.text for f in small_repo.files]))


@pytest.fixture
def task():
    prompt = APP_MAIN[: APP_MAIN.index("send(s)")]
    return CompletionTask("t0", "small", "app/Main.sub", prompt, "send(s);", cursor_of(prompt))


def test_file_deps_golden(small_index):
    assert render_file_deps(["util.S"], small_index) == "// module util\n// class S\n//   field n\n//   str trim(str x)"


def test_file_deps_empty_and_ordering(small_index):
    assert render_file_deps([], small_index) == ""
    skipped = []
    assert render_file_deps(["nope.X"], small_index, skipped) == ""
    assert [e.qname for e in skipped] == ["nope.X"]
    two = render_file_deps(["net.Client", "util.S"], small_index)
    assert two.index("// module net") < two.index("// module util")
    assert render_file_deps(["util.S", "util.S"], small_index) == render_file_deps(["util.S"], small_index)


def test_token_deps_render():
    valid = ValidTokenSet.from_pairs([("trim", "member_of_receiver"), ("len", "member_of_receiver")])
    assert render_token_deps(valid) == "// valid identifiers here: len, trim"
    assert render_token_deps([]) == "// valid identifiers here:"


def test_token_deps_budget_truncates_at_last_fitting_identifier(backend):
    names = [f"name{i:04d}" for i in range(1000)]

    def count(s):
        return len(backend.encode(s))

    text = render_token_deps(names, 300, count)
    assert count(text) <= 300
    kept = text.split(": ", 1)[1].split(", ")
    assert kept == sorted(names)[: len(kept)]
    # oracle: one more identifier would not fit
    assert count(text + f", {sorted(names)[len(kept)]}") > 300


def test_render_retrieved_format(small_repo):
    w = build_windows(small_repo)[0]
    text = render_retrieved([(w, 0.5)])
    lines = text.split("\n")
    assert lines[0] == f"// retrieved from {w.path}:{w.start_line}-{w.end_line}"
    assert all(line.startswith("//") for line in lines)


def test_in_file_only(task, small_index, small_repo, backend):
    bundle = assemble(task, StrategyConfig(), small_index, build_windows(small_repo), backend)
    assert bundle.kinds() == [IN_FILE]
    assert bundle.text == task.prompt


def test_segment_order(task, small_index, small_repo, backend):
    windows = build_windows(small_repo)
    bundle = assemble(task, StrategyConfig(prompt_f=True, rag=True), small_index, windows, backend)
    assert bundle.kinds() == [FILE_DEPS, RETRIEVED, IN_FILE]
    bundle = assemble(task, StrategyConfig(prompt_f=True, prompt_t=True, rag=True), small_index, windows, backend)
    assert bundle.kinds() == [FILE_DEPS, TOKEN_DEPS, RETRIEVED, IN_FILE]
    assert bundle.segment(TOKEN_DEPS).text == "// valid identifiers here: host, send"
    assert "// module util" in bundle.segment(FILE_DEPS).text and "// module net" in bundle.segment(FILE_DEPS).text


def test_retrieval_excludes_cursor_window(task, small_index, small_repo, backend):
    bundle = assemble(task, StrategyConfig(rag=True), small_index, build_windows(small_repo), backend)
    assert "app/Main.sub" not in bundle.segment(RETRIEVED).text


def test_in_file_keeps_last_2000_tokens(backend):
    body = "".join(f"    int v{i} = {i};\n" for i in range(400))
    prompt = "package p;\nclass A {\n  void f() {\n" + body + "    int q = "
    ids = backend.encode(prompt)
    assert len(ids) > 2500
    t = CompletionTask("t", "r", "A.sub", prompt, "1;", cursor_of(prompt))
    index = build_index(RepoSnapshot("mem", (SourceFile("A.sub", UTIL_S),)))
    bundle = assemble(t, StrategyConfig(), index, [], backend)
    seg = bundle.segment(IN_FILE)
    assert seg.token_count == 2000
    assert seg.text == backend.decode(ids[-2000:])


def test_cross_file_segment_keeps_first_tokens(task, small_index, small_repo, backend):
    cfg = StrategyConfig(rag=True, per_crossfile_tokens=20)
    seg = assemble(task, cfg, small_index, build_windows(small_repo), backend).segment(RETRIEVED)
    full = assemble(task, StrategyConfig(rag=True), small_index, build_windows(small_repo), backend).segment(RETRIEVED)
    assert seg.token_count == 20
    assert seg.text == backend.decode(backend.encode(full.text)[:20])


def test_strategy_config_gate_and_labels():
    with pytest.raises(ConfigError, match="expensive"):
        StrategyConfig(decode=True, post=True)
    assert StrategyConfig(decode=True, post=True, allow_slow=True).label == "D+P"
    for label in ["In-file", "RAG", "Prompt-F", "Prompt-T", "Decode", "Post", "F+D", "RAG+T+P"]:
        assert StrategyConfig.from_label(label).label == label
    assert StrategyConfig.from_label("prompt-f,decode") == StrategyConfig(prompt_f=True, decode=True)
    with pytest.raises(ConfigError):
        StrategyConfig.from_label("X+Y")
    assert StrategyConfig().in_file_tokens == 2000 and StrategyConfig().beam_width == 3


def test_perturb_seed_is_stable():
    cfg = StrategyConfig(drop_rate=0.3, perturb_seed=5)
    assert perturb_seed_for(cfg, "a", "prompt") == perturb_seed_for(cfg, "a", "prompt")
    assert perturb_seed_for(cfg, "a", "prompt") != perturb_seed_for(cfg, "b", "prompt")

