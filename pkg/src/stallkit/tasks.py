"""Completion tasks and their JSONL form.

Records follow the CrossCodeEval layout (``prompt`` / ``groundtruth`` /
``metadata``); the flat layout written by :func:`save_tasks` is::

    {"task_id", "repo", "file", "prompt", "groundtruth",
     "cursor": {"line", "col"}, "meta": {...}}

Fields this module does not know about are carried through unchanged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import MalformedRecord

_KNOWN = ("task_id", "repo", "file", "prompt", "groundtruth", "cursor", "meta")


def cursor_of(prefix: str) -> tuple[int, int]:
    line = prefix.count("\n")
    return line, len(prefix) - (prefix.rfind("\n") + 1)


@dataclass
class CompletionTask:
    task_id: str
    repo: str
    file: str
    prompt: str
    groundtruth: str
    cursor: tuple[int, int] = (0, 0)
    meta: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def prefix(self) -> str:
        return self.prompt

    def to_record(self) -> dict:
        rec = dict(self.extra)
        rec.update(
            task_id=self.task_id,
            repo=self.repo,
            file=self.file,
            prompt=self.prompt,
            groundtruth=self.groundtruth,
            cursor={"line": self.cursor[0], "col": self.cursor[1]},
            meta=self.meta,
        )
        return rec

    @classmethod
    def from_record(cls, rec: dict, line_number: int = 0) -> "CompletionTask":
        if not isinstance(rec, dict):
            raise MalformedRecord(line_number, "record is not a JSON object")
        for key in ("prompt", "groundtruth"):
            if not isinstance(rec.get(key), str):
                raise MalformedRecord(line_number, f"missing or non-string {key!r}")
        metadata = rec.get("metadata") if isinstance(rec.get("metadata"), dict) else {}
        task_id = rec.get("task_id", metadata.get("task_id"))
        if task_id is None:
            raise MalformedRecord(line_number, "missing 'task_id'")
        cursor = rec.get("cursor")
        if isinstance(cursor, dict) and {"line", "col"} <= cursor.keys():
            cur = (int(cursor["line"]), int(cursor["col"]))
        else:
            cur = cursor_of(rec["prompt"])
        return cls(
            task_id=str(task_id),
            repo=str(rec.get("repo", metadata.get("repository", ""))),
            file=str(rec.get("file", metadata.get("file", ""))),
            prompt=rec["prompt"],
            groundtruth=rec["groundtruth"],
            cursor=cur,
            meta=dict(rec.get("meta") or {}),
            extra={k: v for k, v in rec.items() if k not in _KNOWN},
        )


def save_tasks(tasks: Iterable[CompletionTask], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in tasks:
            fh.write(json.dumps(t.to_record(), sort_keys=True) + "\n")


def load_tasks(path: str | Path) -> list[CompletionTask]:
    tasks = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as err:
                raise MalformedRecord(n, f"invalid JSON: {err.msg}") from err
            tasks.append(CompletionTask.from_record(rec, n))
    return tasks
