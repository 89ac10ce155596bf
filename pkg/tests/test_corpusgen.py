from __future__ import annotations

import json

import pytest

from stallkit.analyzer import SourceFile, check_line, extract_imports, valid_identifiers_at
from stallkit.corpusgen import generate, training_texts, write_corpus
from stallkit.errors import MalformedRecord
from stallkit.repo_index import build_index, load_repo
from stallkit.tasks import CompletionTask, load_tasks, save_tasks


@pytest.fixture(scope="module")
def corpus():
    return generate(1, n_repos=6)


def test_seed_determinism(tmp_path):
    a = write_corpus(tmp_path / "a", *generate(1, n_repos=3))
    b = write_corpus(tmp_path / "b", *generate(1, n_repos=3))
    assert a.read_bytes() == b.read_bytes()
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_different_seeds_differ():
    assert generate(1, n_repos=2)[1][0].prompt != generate(2, n_repos=2)[1][0].prompt


def test_repo_shape(corpus):
    repos, tasks = corpus
    for repo in repos:
        assert len(repo.files) >= 3
        index = build_index(repo)
        assert not index.skipped and not index.diagnostics
    assert len(tasks) == 60


def test_ground_truth_member_is_valid_at_the_dot(corpus):
    """Brute-force oracle: the member named by the ground truth is a member
    of the receiver's class in the generated symbol table, and the analyzer
    offers it at the dot."""
    repos, tasks = corpus
    by_name = {r.name: (r, build_index(r)) for r in repos}
    for task in tasks:
        repo, index = by_name[task.repo]
        cls = index.modules[task.meta["receiver_class"]]
        assert task.meta["member"] in cls.member_names()
        assert index.file_of[task.meta["receiver_class"]] != task.file
        f = SourceFile(task.file, task.prompt)
        valid = valid_identifiers_at(f, len(task.prompt), index, strict=True)
        assert task.meta["member"] in valid
        assert set(valid) == set(cls.member_names())
        assert task.groundtruth.startswith(task.meta["member"])
        assert check_line(f, len(task.prompt), task.groundtruth, index).passed
        assert extract_imports(f) == [task.meta["receiver_class"]]


def test_unique_valid_tasks_have_one_member(corpus):
    repos, tasks = corpus
    indexes = {r.name: build_index(r) for r in repos}
    uniques = [t for t in tasks if t.meta["unique_valid"]]
    assert uniques
    for t in uniques:
        assert len(valid_identifiers_at(SourceFile(t.file, t.prompt), len(t.prompt), indexes[t.repo])) == 1


def test_unseen_member_absent_from_prefix_and_training(corpus):
    repos, tasks = corpus
    texts = "\n".join(training_texts(repos, tasks))
    for t in tasks:
        if t.meta["unseen"]:
            assert t.meta["member"] not in t.prompt
            line = t.prompt.rsplit("\n", 1)[1] + t.groundtruth
            assert line not in texts
        else:
            assert t.prompt.rsplit("\n", 1)[1] + t.groundtruth in texts


def test_default_sizes():
    repos, tasks = generate(1)
    assert len(repos) == 30 and len(tasks) == 300
    unseen = [t for t in tasks if t.meta["unseen"]]
    assert len(unseen) == 240
    assert sum(t.meta["unique_valid"] for t in unseen) >= 100


def test_distractors_planted(corpus):
    _, tasks = corpus
    for t in tasks:
        noun = next(n for n in ("Message", "Name", "Label", "Path", "Count", "Total", "Size", "Index",
                                "Reset", "Flush", "Limit", "Title", "Depth", "Mode", "Owner")
                    if t.meta["member"].endswith(n))
        assert t.prompt.count(noun) >= 2


def test_bad_sizes():
    with pytest.raises(ValueError):
        generate(1, n_repos=0)


def test_written_corpus_loads(tmp_path, corpus):
    repos, tasks = corpus
    path = write_corpus(tmp_path, repos, tasks)
    loaded = load_repo(tmp_path / "repos" / repos[0].name)
    assert loaded.name == repos[0].name
    assert [f.text for f in loaded.files] == [f.text for f in repos[0].files]
    assert load_tasks(path) == tasks


# -- task JSONL ------------------------------------------------------------------


def test_save_load_round_trip(tmp_path, corpus):
    _, tasks = corpus
    save_tasks(tasks, tmp_path / "t.jsonl")
    assert load_tasks(tmp_path / "t.jsonl") == tasks


def test_missing_groundtruth_is_malformed(tmp_path):
    p = tmp_path / "t.jsonl"
    p.write_text(json.dumps({"task_id": "a", "prompt": "x"}) + "\n")
    with pytest.raises(MalformedRecord) as err:
        load_tasks(p)
    assert err.value.line_number == 1


def test_invalid_json_reports_line(tmp_path):
    p = tmp_path / "t.jsonl"
    good = json.dumps({"task_id": "a", "prompt": "x", "groundtruth": "y"})
    p.write_text(good + "\n{not json\n")
    with pytest.raises(MalformedRecord) as err:
        load_tasks(p)
    assert err.value.line_number == 2


def test_crosscodeeval_shaped_record(tmp_path):
    rec = {
        "prompt": "class A {\n  void f() {\n    x.",
        "groundtruth": "y();",
        "right_context": "\n  }\n}\n",
        "metadata": {"task_id": "proj/42", "repository": "proj", "file": "src/A.java", "extra": [1, 2]},
    }
    p = tmp_path / "cce.jsonl"
    p.write_text(json.dumps(rec) + "\n")
    (task,) = load_tasks(p)
    assert (task.task_id, task.repo, task.file) == ("proj/42", "proj", "src/A.java")
    assert task.cursor == (2, 6)
    assert task.extra["metadata"]["extra"] == [1, 2]
    assert task.extra["right_context"] == "\n  }\n}\n"
    save_tasks([task], tmp_path / "again.jsonl")
    (again,) = load_tasks(tmp_path / "again.jsonl")
    assert again == task


def test_unknown_fields_preserved():
    rec = {"task_id": "a", "repo": "r", "file": "f", "prompt": "p", "groundtruth": "g", "custom": {"k": 1}}
    assert CompletionTask.from_record(rec).to_record()["custom"] == {"k": 1}
