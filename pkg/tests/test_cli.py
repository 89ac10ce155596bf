from __future__ import annotations

import json

import pytest

from stallkit.analyzer import SourceFile, valid_identifiers_at
from stallkit.bench import PAPER_COMBOS, build_bench
from stallkit.cli import INDEX_PATH, main, read_config
from stallkit.lang import identifiers_in
from stallkit.prompt import StrategyConfig
from stallkit.repo_index import build_index, load_repo
from stallkit.tasks import load_tasks


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    assert main(["gen", "--seed", "4", "--repos", "2", "--tasks-per-repo", "3", "--out", str(out)]) == 0
    for repo in sorted((out / "repos").iterdir()):
        assert main(["index", str(repo)]) == 0
    return out


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_writes_tasks(corpus):
    lines = (corpus / "tasks.jsonl").read_text().splitlines()
    assert len(lines) == 6
    assert {"task_id", "repo", "file", "prompt", "groundtruth", "cursor", "meta"} <= json.loads(lines[0]).keys()


def test_index_written_and_idempotent(corpus, capsys):
    repo = sorted((corpus / "repos").iterdir())[0]
    first = (repo / INDEX_PATH).read_bytes()
    code, out, _ = run(capsys, "index", repo)
    assert code == 0 and "indexed" in out
    assert (repo / INDEX_PATH).read_bytes() == first


def test_index_empty_dir_exit_2(tmp_path, capsys):
    code, _, err = run(capsys, "index", tmp_path)
    assert code == 2 and "no .sub files" in err


def test_complete_missing_index_exit_3(tmp_path, capsys):
    main(["gen", "--seed", "4", "--repos", "1", "--tasks-per-repo", "1", "--out", str(tmp_path)])
    capsys.readouterr()
    code, _, err = run(capsys, "complete", tmp_path / "tasks.jsonl")
    assert code == 3 and "stallkit index" in err


def test_complete_in_file_and_dump(corpus, capsys):
    code, plain, _ = run(capsys, "complete", corpus / "tasks.jsonl")
    assert code == 0
    code, dumped, _ = run(capsys, "complete", corpus / "tasks.jsonl", "--dump-prompt")
    assert code == 0 and dumped.startswith("=== InFile")
    assert dumped.splitlines()[-1] == plain.splitlines()[-1]


def test_complete_decode_emits_valid_member(corpus, capsys):
    for t in load_tasks(corpus / "tasks.jsonl"):
        code, out, _ = run(capsys, "complete", corpus / "tasks.jsonl", "--task-id", t.task_id, "--decode")
        assert code == 0
        index = build_index(load_repo(corpus / "repos" / t.repo))
        valid = valid_identifiers_at(SourceFile(t.file, t.prompt), len(t.prompt), index)
        first = identifiers_in(out.strip())[0]
        assert first in valid


def test_decode_post_gate(corpus, capsys):
    code, _, err = run(capsys, "bench", corpus / "tasks.jsonl", "--combo", "decode,post")
    assert code == 2 and "expensive" in err


def test_bench_two_rows_and_json(corpus, capsys, tmp_path):
    out_json = tmp_path / "r.json"
    code, out, _ = run(capsys, "bench", corpus / "tasks.jsonl", "--prompt-f", "--json", out_json, "--no-timing")
    assert code == 0
    table = out.split("\n\n")[0].splitlines()
    assert [row.split()[0] for row in table[2:]] == ["In-file", "Prompt-F"]
    data = json.loads(out_json.read_text())
    assert [r["label"] for r in data] == ["In-file", "Prompt-F"]
    assert "mean_latency_s" not in data[0]


def test_full_flag_matrix_is_paper_set(corpus, capsys):
    code, out, _ = run(capsys, "bench", corpus / "tasks.jsonl", "--prompt-f", "--prompt-t", "--decode",
                       "--post", "--rag", "--subset", "unseen=true")
    assert code == 0
    labels = [row.split()[0] for row in out.split("\n\n")[0].splitlines()[2:]]
    assert labels == list(PAPER_COMBOS)


def test_config_precedence(tmp_path, corpus, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# comment\nprompt_t = true\nmax_new_tokens = 2\n")
    assert read_config(cfg) == {"prompt_t": True, "max_new_tokens": 2}
    out_json = tmp_path / "r.json"
    code, _, _ = run(capsys, "bench", corpus / "tasks.jsonl", "--config", cfg, "--max-new-tokens", "3",
                     "--combo", "Prompt-T", "--json", out_json)
    assert code == 0
    (report,) = json.loads(out_json.read_text())
    assert report["label"] == "Prompt-T"
    # flags (3) beat the file (2): predictions equal a library run at 3 tokens
    tasks = load_tasks(corpus / "tasks.jsonl")
    repos = [load_repo(corpus / "repos" / name) for name in sorted({t.repo for t in tasks})]
    bench = build_bench(repos, tasks)
    for n in (2, 3):
        ref = bench.run(tasks, StrategyConfig(prompt_t=True, max_new_tokens=n))
        same = [i.prediction for i in ref.items] == [i["prediction"] for i in report["items"]]
        assert same is (n == 3)


def test_bad_config_key(tmp_path, corpus, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("nonsense = 1\n")
    code, _, err = run(capsys, "bench", corpus / "tasks.jsonl", "--config", cfg)
    assert code == 2 and "nonsense" in err


def test_backend_unavailable_exit_4(corpus, capsys, monkeypatch):
    monkeypatch.setenv("STALLKIT_BACKEND_URL", "http://127.0.0.1:9")
    code, _, err = run(capsys, "bench", corpus / "tasks.jsonl")
    assert code == 4 and "backend unavailable" in err


def test_train_then_complete_with_model(corpus, capsys, tmp_path):
    model = tmp_path / "m.json"
    code, _, _ = run(capsys, "train", corpus / "tasks.jsonl", "--out", model)
    assert code == 0 and model.exists()
    code, a, _ = run(capsys, "complete", corpus / "tasks.jsonl", "--model", model, "--prompt-f")
    code2, b, _ = run(capsys, "complete", corpus / "tasks.jsonl", "--prompt-f")
    assert code == code2 == 0 and a == b
