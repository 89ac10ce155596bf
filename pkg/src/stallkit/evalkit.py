"""Completion metrics, benchmark runs and report tables."""

from __future__ import annotations

import json
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .lang import identifiers_in
from .prompt import StrategyConfig
from .timing import PHASES, Timings

extract_identifiers = identifiers_in


def levenshtein(a: str, b: str) -> int:
    """Character-level edit distance (two-row dynamic programme)."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def line_em(pred: str, ref: str) -> int:
    return int(pred.strip() == ref.strip())


def line_es(pred: str, ref: str) -> float:
    """``1 - lev / max(len)`` on the stripped strings; 1.0 for two empties."""
    p, r = pred.strip(), ref.strip()
    longest = max(len(p), len(r))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(p, r) / longest


def id_em(pred: str, ref: str) -> int:
    return int(extract_identifiers(pred) == extract_identifiers(ref))


def id_f1(pred: str, ref: str) -> float:
    p, r = Counter(extract_identifiers(pred)), Counter(extract_identifiers(ref))
    if not p and not r:
        return 1.0
    overlap = sum((p & r).values())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(p.values())
    recall = overlap / sum(r.values())
    return 2 * precision * recall / (precision + recall)


def member_hit(pred: str, ref: str) -> int:
    """Whether the first identifier (the member name for a completion that
    starts right after a dot) matches."""
    p, r = extract_identifiers(pred), extract_identifiers(ref)
    return int(bool(r) and p[:1] == r[:1])


@dataclass
class ItemResult:
    task_id: str
    prediction: str
    groundtruth: str
    line_em: float
    line_es: float
    id_em: float
    id_f1: float
    member_hit: int
    total_s: float = 0.0
    analysis_s: float = 0.0
    inference_s: float = 0.0
    retrieval_s: float = 0.0
    error: str | None = None
    triggered_steps: int = 0
    mask_violations: int = 0
    mask_fallbacks: int = 0
    candidates: list[str] = field(default_factory=list)
    passed: list[bool] = field(default_factory=list)
    chosen_rank: int | None = None

    @classmethod
    def score(cls, task_id: str, prediction: str, groundtruth: str) -> "ItemResult":
        return cls(
            task_id,
            prediction,
            groundtruth,
            line_em(prediction, groundtruth),
            line_es(prediction, groundtruth),
            id_em(prediction, groundtruth),
            id_f1(prediction, groundtruth),
            member_hit(prediction, groundtruth),
        )

    @classmethod
    def failed(cls, task_id: str, groundtruth: str, error: str) -> "ItemResult":
        return cls(task_id, "", groundtruth, 0, 0.0, 0, 0.0, 0, error=error)


TIMING_FIELDS = ("total_s", "analysis_s", "inference_s", "retrieval_s")


@dataclass
class MetricsReport:
    label: str
    n_tasks: int
    line_em: float
    line_es: float
    id_em: float
    id_f1: float
    member_acc: float
    mean_latency_s: float
    latency_breakdown: dict[str, float]
    n_errors: int = 0
    items: list[ItemResult] = field(default_factory=list)

    @classmethod
    def aggregate(cls, label: str, items: Sequence[ItemResult]) -> "MetricsReport":
        if not items:
            raise ValueError("cannot aggregate an empty run")

        def pct(name):
            return 100.0 * float(np.mean([getattr(i, name) for i in items]))

        def mean(name):
            return float(np.mean([getattr(i, name) for i in items]))

        return cls(
            label=label,
            n_tasks=len(items),
            line_em=pct("line_em"),
            line_es=pct("line_es"),
            id_em=pct("id_em"),
            id_f1=pct("id_f1"),
            member_acc=pct("member_hit"),
            mean_latency_s=mean("total_s"),
            latency_breakdown={p: mean(f"{p}_s") for p in PHASES},
            n_errors=sum(1 for i in items if i.error),
            items=list(items),
        )

    def subset(self, task_ids) -> "MetricsReport":
        wanted = set(task_ids)
        return MetricsReport.aggregate(self.label, [i for i in self.items if i.task_id in wanted])

    def to_dict(self, *, include_timing: bool = True, include_items: bool = True) -> dict:
        data = asdict(self)
        if not include_items:
            data.pop("items")
        if not include_timing:
            data.pop("mean_latency_s")
            data.pop("latency_breakdown")
            for item in data.get("items", []):
                for name in TIMING_FIELDS:
                    item.pop(name)
        return data

    def to_json(self, *, include_timing: bool = True, include_items: bool = True) -> str:
        return json.dumps(
            self.to_dict(include_timing=include_timing, include_items=include_items), sort_keys=True, indent=1
        )


EngineSource = Callable[[str], object] | Mapping[str, object]


def _engine(engines: EngineSource, repo: str):
    return engines[repo] if isinstance(engines, Mapping) else engines(repo)


def run_item(task, config: StrategyConfig, engine) -> ItemResult:
    """Complete one task and score it; failures become an all-zero item."""
    timings = Timings()
    t0 = time.perf_counter()
    try:
        result = engine.complete(task, config, timings)
    except Exception as err:  # per-task failures must not abort a run
        item = ItemResult.failed(task.task_id, task.groundtruth, f"{type(err).__name__}: {err}")
        item.total_s = time.perf_counter() - t0
        return item
    total = time.perf_counter() - t0
    item = ItemResult.score(task.task_id, result.prediction, task.groundtruth)
    item.total_s = total
    item.analysis_s = timings.get("analysis")
    item.inference_s = timings.get("inference")
    item.retrieval_s = timings.get("retrieval")
    trig = result.trace.triggered
    item.triggered_steps = len(trig)
    item.mask_violations = result.trace.violations
    item.mask_fallbacks = result.trace.fallbacks
    item.candidates = [c.text for c in result.candidates]
    if result.reports:
        item.passed = [r.passed for r in result.reports]
        item.chosen_rank = next(i for i, c in enumerate(result.candidates) if c is result.chosen)
    return item


def run_bench(tasks, config: StrategyConfig, engines: EngineSource, *, jobs: int = 1, label: str | None = None) -> MetricsReport:
    """Run ``config`` over ``tasks`` (engines looked up by ``task.repo``)."""
    tasks = list(tasks)
    if not tasks:
        raise ValueError("run_bench needs at least one task")

    def one(task):
        return run_item(task, config, _engine(engines, task.repo))

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            items = list(pool.map(one, tasks))
    else:
        items = [one(t) for t in tasks]
    return MetricsReport.aggregate(label or config.label, items)


def report_from_predictions(label: str, rows: Sequence[tuple[str, str, str]]) -> MetricsReport:
    """Score precomputed ``(task_id, prediction, groundtruth)`` rows."""
    return MetricsReport.aggregate(label, [ItemResult.score(*r) for r in rows])


def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(header, widths)))]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))))
    return "\n".join(lines)


def metrics_table(reports: Sequence[MetricsReport]) -> str:
    header = ["Strategy", "Line EM", "Line ES", "ID EM", "F1", "n"]
    rows = [[r.label, f"{r.line_em:.2f}", f"{r.line_es:.2f}", f"{r.id_em:.2f}", f"{r.id_f1:.2f}", str(r.n_tasks)] for r in reports]
    return _table(header, rows)


def latency_table(reports: Sequence[MetricsReport]) -> str:
    header = ["Strategy", "Analysis (s)", "Inference (s)", "Retrieval (s)", "Total (s)"]
    rows = [
        [
            r.label,
            f"{r.latency_breakdown['analysis']:.4f}",
            f"{r.latency_breakdown['inference']:.4f}",
            f"{r.latency_breakdown['retrieval']:.4f}",
            f"{r.mean_latency_s:.4f}",
        ]
        for r in reports
    ]
    return _table(header, rows)
