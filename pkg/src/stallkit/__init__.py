"""Static-analysis-boosted repository-level code completion.

Static analysis enters the completion pipeline at three points: the prompt
(file-level and token-level dependency contexts), decoding (masking invalid
member names), and post-processing (choosing the first beam candidate that
passes a static check).  A retrieval baseline, a deterministic n-gram
reference model, a synthetic benchmark generator and an evaluation harness
complete the toolkit.
"""

from __future__ import annotations

from .analyzer import (
    ClassSummary,
    MethodSignature,
    ModuleSummary,
    SourceFile,
    StaticCheckReport,
    ValidTokenSet,
    check_line,
    extract_imports,
    parse_file,
    valid_identifiers_at,
)
from .bench import PAPER_COMBOS, build_bench
from .corpusgen import generate, training_texts, write_corpus
from .decoder import Candidate, beam_search, generate as generate_greedy, mask_from_valid, masked_argmax, perturb_valid_set
from .evalkit import MetricsReport, run_bench
from .pipeline import CompletionEngine
from .postprocess import select
from .prompt import PromptBundle, StrategyConfig, assemble
from .repo_index import RepoSnapshot, SymbolIndex, build_index, load_repo, resolve_import
from .retriever import build_windows, jaccard, retrieve
from .tasks import CompletionTask, load_tasks, save_tasks

__version__ = "0.1.0"
