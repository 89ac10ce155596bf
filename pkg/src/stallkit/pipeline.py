"""End-to-end completion of one task under a strategy configuration."""

from __future__ import annotations

from dataclasses import dataclass, field

from .analyzer import SourceFile, StaticCheckReport, valid_identifiers_at
from .decoder import Candidate, DecodeTrace, beam_search, generate, mask_from_valid, perturb_valid_set
from .errors import SubjectSyntaxError
from .postprocess import select
from .prompt import PromptBundle, StrategyConfig, assemble, perturb_seed_for
from .retriever import build_windows
from .timing import Timings


@dataclass
class CompletionResult:
    prediction: str
    chosen: Candidate
    bundle: PromptBundle
    candidates: list[Candidate] = field(default_factory=list)
    reports: list[StaticCheckReport] = field(default_factory=list)
    trace: DecodeTrace = field(default_factory=DecodeTrace)
    timings: Timings = field(default_factory=Timings)


class CompletionEngine:
    """Shared, read-only state for completing tasks of one repository:
    the snapshot, its symbol index, the retrieval windows and a backend."""

    def __init__(self, repo, index, backend, windows=None):
        self.repo = repo
        self.index = index
        self.backend = backend
        self.windows = windows if windows is not None else (build_windows(repo) if repo is not None else [])
        pool: set[str] = set()
        for summary in index.modules.values():
            pool.update(summary.member_names())
        self.noise_pool = tuple(sorted(pool))

    def mask_provider(self, task, config: StrategyConfig, timings: Timings):
        """Valid first sub-tokens at the current decoding position, computed
        by analysing the file prefix plus the tokens generated so far."""

        def provide(out_ids):
            with timings.span("analysis"):
                text = task.prompt + self.backend.decode(list(out_ids))
                try:
                    valid = valid_identifiers_at(SourceFile(task.file, text), len(text), self.index)
                except SubjectSyntaxError:
                    return None
                if config.perturbed:
                    seed = perturb_seed_for(config, task.task_id, f"decode:{len(out_ids)}")
                    valid = perturb_valid_set(valid, config.drop_rate, config.noise_rate, self.noise_pool, seed)
                return mask_from_valid(valid, self.backend)

        return provide

    def complete(self, task, config: StrategyConfig, timings: Timings | None = None) -> CompletionResult:
        timings = timings or Timings()
        trace = DecodeTrace()
        bundle = assemble(
            task, config, self.index, self.windows, self.backend, timings=timings, noise_pool=self.noise_pool
        )
        with timings.span("inference"):
            ids = self.backend.encode(bundle.text)
        if not ids:
            ids = [self.backend.newline_id]
        provider = self.mask_provider(task, config, timings) if config.decode else None
        reports: list[StaticCheckReport] = []
        if config.post:
            candidates = beam_search(
                self.backend,
                ids,
                beam_width=config.beam_width,
                max_new_tokens=config.max_new_tokens,
                mask_provider=provider,
                timings=timings,
                trace=trace,
            )
            with timings.span("analysis"):
                chosen, reports = select(candidates, task, self.index)
        else:
            chosen = generate(
                self.backend, ids, max_new_tokens=config.max_new_tokens, mask_provider=provider,
                timings=timings, trace=trace,
            )
            candidates = [chosen]
        return CompletionResult(chosen.text, chosen, bundle, candidates, reports, trace, timings)
