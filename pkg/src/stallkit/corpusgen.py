"""Deterministic synthetic repositories and cross-file completion tasks.

Each repository has an API package of classes and an app package of
consumer files.  Every task's consumer file imports one API class, builds a
receiver of that class, and ends with the line being completed; the cursor
sits right after ``receiver.`` so the completion must name a member that is
only declared in another file.

A few properties make the benchmark informative for an n-gram reference
model:

* member names start with a pseudo-word unique across the whole benchmark
  (``bavoMessage``), so no model can guess them from the target file alone;
* distractor locals and fields reuse the target's second word
  (``dexuMessage``) to look similar without sharing its first sub-token;
* consumer files call builtin ``str`` members, so "what follows a dot" in
  the target file itself points away from the API;
* one wiring file per repository calls every API member twice, so once the
  member is chosen the rest of the line is determined by the training text;
* for "unseen" tasks the ground-truth line is dropped from training text.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .analyzer import SourceFile
from .lang import KEYWORDS
from .repo_index import MANIFEST, RepoSnapshot
from .tasks import CompletionTask, cursor_of, load_tasks, save_tasks

CONSONANTS = "bdfgklmnprstvz"
VOWELS = "aeiou"

# noun -> (return type, parameters) for methods, so a noun always has the
# same call shape wherever it appears.
METHOD_NOUNS: dict[str, tuple[str, tuple[tuple[str, str], ...]]] = {
    "Message": ("str", (("text", "str"),)),
    "Name": ("str", ()),
    "Label": ("str", (("prefix", "str"),)),
    "Path": ("str", (("root", "str"),)),
    "Count": ("int", ()),
    "Total": ("int", (("step", "int"),)),
    "Size": ("int", ()),
    "Index": ("int", (("offset", "int"),)),
    "Reset": ("void", ()),
    "Flush": ("void", (("reason", "str"),)),
}
FIELD_NOUNS: dict[str, str] = {"Limit": "int", "Title": "str", "Depth": "int", "Mode": "str", "Owner": "str"}
CLASS_SUFFIXES = ("Client", "Store", "Service", "Buffer", "Parser", "Table")
PARAM_TYPES = {name: t for _, params in METHOD_NOUNS.values() for name, t in params}


class _Words:
    """Fresh pseudo-words (consonant-vowel syllables), never repeated."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.used: set[str] = set(KEYWORDS) | {"p", "res", "total", "size", "run", "wire"} | set(PARAM_TYPES)

    def fresh(self, syllables: int = 2) -> str:
        while True:
            word = "".join(self.rng.choice(CONSONANTS) + self.rng.choice(VOWELS) for _ in range(syllables))
            if word not in self.used:
                self.used.add(word)
                return word


@dataclass(frozen=True)
class _Member:
    name: str
    kind: str  # "method" | "field"
    type_name: str
    params: tuple[tuple[str, str], ...] = ()

    def call(self) -> str:
        if self.kind == "field":
            return self.name
        return f"{self.name}({', '.join(n for n, _ in self.params)})"


@dataclass(frozen=True)
class _ApiClass:
    package: str
    name: str
    members: tuple[_Member, ...]

    @property
    def qname(self) -> str:
        return f"{self.package}.{self.name}"

    @property
    def unique(self) -> bool:
        return len(self.members) == 1


def _method_body(m: _Member) -> list[str]:
    if m.type_name == "str":
        if m.params:
            return [f"str out = {m.params[0][0]}.trim();", "return out;"]
        return ['return "ok";']
    if m.type_name == "int":
        return [f"return {m.params[0][0]};"] if m.params else ["return 0;"]
    return [f"{m.params[0][0]}.trim();"] if m.params else ["return;"]


def _render_api(cls: _ApiClass) -> str:
    out = [f"package {cls.package};", "", f"class {cls.name} {{"]
    for m in cls.members:
        if m.kind == "field":
            out.append(f"  {m.type_name} {m.name};")
    for m in cls.members:
        if m.kind == "method":
            params = ", ".join(f"{t} {n}" for n, t in m.params)
            out.append(f"  {m.type_name} {m.name}({params}) {{")
            out += [f"    {line}" for line in _method_body(m)]
            out.append("  }")
    out.append("}")
    return "\n".join(out) + "\n"


def _local_init(type_name: str) -> str:
    return "p.trim()" if type_name == "str" else "p.len()"


def _target_line(recv: str, m: _Member) -> tuple[str, str]:
    """Return (text before the member, rest of the line)."""
    if m.kind == "method" and m.type_name == "void":
        lead = f"{recv}."
    else:
        lead = f"{m.type_name} res = {recv}."
    return lead, f"{m.call()};"


def _make_api_classes(rng: random.Random, words: _Words, package: str) -> list[_ApiClass]:
    n_classes = rng.randint(2, 4)
    kinds = ["unique", "multi"] + [rng.choice(["unique", "multi"]) for _ in range(n_classes - 2)]
    rng.shuffle(kinds)
    classes = []
    for kind in kinds:
        name = words.fresh().capitalize() + rng.choice(CLASS_SUFFIXES)
        members: list[_Member] = []
        n_fields = 0 if kind == "unique" else rng.randint(1, 2)
        n_methods = 1 if kind == "unique" else rng.randint(2, 3)
        for noun in rng.sample(sorted(FIELD_NOUNS), n_fields):
            members.append(_Member(words.fresh() + noun, "field", FIELD_NOUNS[noun]))
        for noun in rng.sample(sorted(METHOD_NOUNS), n_methods):
            ret, params = METHOD_NOUNS[noun]
            members.append(_Member(words.fresh() + noun, "method", ret, params))
        classes.append(_ApiClass(package, name, tuple(members)))
    return classes


def _render_wiring(app: str, name: str, classes: Sequence[_ApiClass], words: _Words) -> str:
    out = [f"package {app};", ""]
    out += [f"import {c.qname};" for c in classes]
    out += ["", f"class {name} {{", "  void wire(str p) {"]
    for pname in sorted({n for c in classes for m in c.members for n, _ in m.params}):
        out.append(f"    {PARAM_TYPES[pname]} {pname} = {_local_init(PARAM_TYPES[pname])};")
    for c in classes:
        for _ in range(2):
            recv = words.fresh()
            out.append(f"    {c.name} {recv} = {c.name}();")
            for m in c.members:
                lead, rest = _target_line(recv, m)
                out.append(f"    {lead}{rest}")
    out += ["  }", "}"]
    return "\n".join(out) + "\n"


def _render_consumer(
    rng: random.Random, words: _Words, app: str, name: str, cls: _ApiClass, target: _Member, distractors: int
) -> tuple[str, str, str]:
    """Return (file text, prefix up to the cursor, ground truth)."""
    noun_type = target.type_name if target.type_name != "void" else "str"
    noun = next(n for n in list(METHOD_NOUNS) + list(FIELD_NOUNS) if target.name.endswith(n))
    fields = []
    stmts = ["int total = p.len();"]
    for pname, ptype in target.params:
        stmts.append(f"{ptype} {pname} = {_local_init(ptype)};")
    for i in range(distractors):
        decoy = words.fresh() + noun
        if i % 2 == 0:
            stmts.append(f"{noun_type} {decoy} = {_local_init(noun_type)};")
        else:
            fields.append(f"  {noun_type} {decoy};")
    stmts.append("int size = p.len();")
    body = stmts[1:]
    rng.shuffle(body)
    stmts = stmts[:1] + body
    recv = words.fresh()
    stmts.insert(rng.randint(1, len(stmts)), f"{cls.name} {recv} = {cls.name}();")
    lead, rest = _target_line(recv, target)
    head = [f"package {app};", "", f"import {cls.qname};", "", f"class {name} {{", *fields, "  void run(str p) {"]
    head += [f"    {s}" for s in stmts]
    prefix = "\n".join(head) + f"\n    {lead}"
    text = prefix + rest + "\n  }\n}\n"
    return text, prefix, rest


def generate(
    seed: int,
    n_repos: int = 30,
    tasks_per_repo: int = 10,
    distractors: int = 2,
    *,
    unique_fraction: float = 0.5,
    unseen_fraction: float = 0.8,
) -> tuple[list[RepoSnapshot], list[CompletionTask]]:
    """Build ``n_repos`` repositories with ``tasks_per_repo`` tasks each."""
    if n_repos < 1:
        raise ValueError("n_repos must be at least 1")
    rng = random.Random(seed)
    words = _Words(rng)
    repos: list[RepoSnapshot] = []
    tasks: list[CompletionTask] = []
    for r in range(n_repos):
        base = words.fresh()
        repo_name = f"repo{r:03d}_{base}"
        api, app = f"{base}lib", f"{base}app"
        classes = _make_api_classes(rng, words, api)
        files = [SourceFile(f"{api}/{c.name}.sub", _render_api(c)) for c in classes]
        wiring = words.fresh().capitalize() + "Wiring"
        files.append(SourceFile(f"{app}/{wiring}.sub", _render_wiring(app, wiring, classes, words)))

        n_unique = round(tasks_per_repo * unique_fraction)
        n_unseen = round(tasks_per_repo * unseen_fraction)
        unique_flags = [i < n_unique for i in range(tasks_per_repo)]
        unseen_flags = [i < n_unseen for i in range(tasks_per_repo)]
        rng.shuffle(unique_flags)
        rng.shuffle(unseen_flags)
        uniques = [c for c in classes if c.unique]
        multis = [c for c in classes if not c.unique]
        for t in range(tasks_per_repo):
            cls = rng.choice(uniques if unique_flags[t] else multis)
            target = rng.choice(cls.members)
            consumer = words.fresh().capitalize() + "Job"
            text, prefix, rest = _render_consumer(rng, words, app, consumer, cls, target, distractors)
            path = f"{app}/{consumer}.sub"
            files.append(SourceFile(path, text))
            tasks.append(
                CompletionTask(
                    task_id=f"{repo_name}/{t:03d}",
                    repo=repo_name,
                    file=path,
                    prompt=prefix,
                    groundtruth=rest,
                    cursor=cursor_of(prefix),
                    meta={
                        "unique_valid": cls.unique,
                        "unseen": unseen_flags[t],
                        "member": target.name,
                        "member_kind": target.kind,
                        "receiver_class": cls.qname,
                        "n_valid": len(cls.members),
                    },
                )
            )
        repos.append(RepoSnapshot(repo_name, tuple(files), repo_name))
    return repos, tasks


def training_texts(repos: Iterable[RepoSnapshot], tasks: Iterable[CompletionTask]) -> list[str]:
    """All repository files, with the ground-truth line of every unseen
    task removed from its file."""
    drop: dict[tuple[str, str], set[int]] = {}
    for t in tasks:
        if t.meta.get("unseen"):
            drop.setdefault((t.repo, t.file), set()).add(t.cursor[0])
    texts = []
    for repo in repos:
        for f in repo.files:
            lines = drop.get((repo.name, f.path))
            if lines:
                kept = [ln for i, ln in enumerate(f.text.split("\n")) if i not in lines]
                texts.append("\n".join(kept))
            else:
                texts.append(f.text)
    return texts


def write_corpus(out_dir: str | Path, repos: Sequence[RepoSnapshot], tasks: Sequence[CompletionTask]) -> Path:
    """Write ``<out>/repos/<name>/...`` plus ``<out>/tasks.jsonl``."""
    out = Path(out_dir)
    for repo in repos:
        root = out / "repos" / repo.name
        for f in repo.files:
            p = root / f.path
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(f.text, encoding="utf-8")
        (root / MANIFEST).write_text(json.dumps({"name": repo.name, "language": "subjectlang"}) + "\n")
    save_tasks(tasks, out / "tasks.jsonl")
    return out / "tasks.jsonl"


__all__ = ["generate", "training_texts", "write_corpus", "load_tasks", "save_tasks", "CompletionTask"]
