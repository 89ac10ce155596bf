"""Post-processing: keep the first beam candidate that passes static checking."""

from __future__ import annotations

from typing import Callable, Sequence

from .analyzer import SourceFile, StaticCheckReport, check_line
from .decoder import Candidate


def select(
    candidates: Sequence[Candidate],
    task,
    index,
    check: Callable[..., StaticCheckReport] = check_line,
) -> tuple[Candidate, list[StaticCheckReport]]:
    """Return the first candidate whose line passes ``check`` when spliced at
    the task cursor, or the model's top-1 when none does, plus every report.

    Candidates are checked in rank order and never modified.
    """
    if not candidates:
        raise ValueError("select needs at least one candidate")
    file = SourceFile(task.file, task.prompt)
    cursor = len(task.prompt)
    reports = [check(file, cursor, c.text, index) for c in candidates]
    for cand, report in zip(candidates, reports):
        if report.passed:
            return cand, reports
    return candidates[0], reports
