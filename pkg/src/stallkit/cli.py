"""Command-line entry point: ``stallkit index|complete|gen|bench|train``.

Exit codes: 0 success, 2 input error, 3 missing artifact, 4 backend
unavailable.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .bench import PAPER_COMBOS, build_bench
from .corpusgen import generate, training_texts, write_corpus
from .errors import BackendUnavailable, ConfigError, StallkitError
from .evalkit import latency_table, metrics_table
from .lm import NGramBackend, NGramModel, RemoteBackend, train_ngram
from .pipeline import CompletionEngine
from .prompt import StrategyConfig
from .repo_index import SymbolIndex, build_index, load_repo
from .tasks import load_tasks

EXIT_OK, EXIT_INPUT, EXIT_MISSING, EXIT_BACKEND = 0, 2, 3, 4
INDEX_PATH = Path(".stallkit") / "index.json"
BACKEND_ENV = "STALLKIT_BACKEND_URL"
FLAG_FIELDS = ("prompt_f", "prompt_t", "decode", "post", "rag")


class MissingArtifact(StallkitError):
    pass


# ---------------------------------------------------------------------------
# configuration


def _coerce(name: str, raw: str):
    kinds = {f.name: f.type for f in dataclasses.fields(StrategyConfig)}
    if name not in kinds:
        raise ConfigError(f"unknown config key {name!r}")
    kind = kinds[name]
    try:
        if kind == "bool":
            low = raw.strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(raw)
            return low in ("1", "true", "yes", "on")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw


def read_config(path: str | Path) -> dict:
    """``key=value`` lines (``#`` comments allowed), keys named like the
    StrategyConfig fields."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise MissingArtifact(f"config file {path} not found") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = _coerce(key.replace("-", "_"), value)
    return values


def _settings(args) -> dict:
    """Defaults < config file < command-line flags."""
    values = read_config(args.config) if getattr(args, "config", None) else {}
    for name in FLAG_FIELDS + ("allow_slow",):
        if getattr(args, name, False):
            values[name] = True
    for name in ("in_file_tokens", "per_crossfile_tokens", "retrieved_k", "max_new_tokens", "beam_width",
                 "drop_rate", "noise_rate", "perturb_seed"):
        value = getattr(args, name, None)
        if value is not None:
            values[name] = value
    return values


# ---------------------------------------------------------------------------
# backend


def _backend(args, repos=None, tasks=None):
    url = os.environ.get(BACKEND_ENV)
    if url:
        return RemoteBackend(url)
    priming = getattr(args, "priming", 0.8)
    if getattr(args, "model", None):
        path = Path(args.model)
        if not path.exists():
            raise MissingArtifact(f"model file {path} not found")
        return NGramBackend(NGramModel.from_json(path.read_text(encoding="utf-8")), priming=priming)
    model = train_ngram(training_texts(repos, tasks), args.order, args.alpha)
    return NGramBackend(model, priming=priming)


def _repos_dir(args) -> Path:
    return Path(args.repos) if args.repos else Path(args.task_file).parent / "repos"


def _load_all_repos(root: Path, names):
    repos = []
    for name in sorted(set(names)):
        d = root / name
        if not d.is_dir():
            raise MissingArtifact(f"repository {d} not found")
        repos.append(load_repo(d))
    return repos


# ---------------------------------------------------------------------------
# commands


def cmd_index(args) -> int:
    repo = load_repo(args.repo_dir)
    index = build_index(repo, jobs=args.jobs)
    out = Path(args.repo_dir) / INDEX_PATH
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(index.to_json(include_build_time=False) + "\n", encoding="utf-8")
    print(f"indexed {len(index.modules)} classes from {len(repo.files)} files "
          f"({len(index.skipped)} skipped) in {index.build_time:.4f}s -> {out}")
    return EXIT_OK


def cmd_gen(args) -> int:
    repos, tasks = generate(args.seed, args.repos_count, args.tasks_per_repo, args.distractors,
                            unique_fraction=args.unique_fraction, unseen_fraction=args.unseen_fraction)
    path = write_corpus(args.out, repos, tasks)
    print(f"wrote {len(repos)} repositories and {len(tasks)} tasks -> {path}")
    return EXIT_OK


def cmd_train(args) -> int:
    tasks = load_tasks(args.task_file)
    repos = _load_all_repos(_repos_dir(args), [t.repo for t in tasks])
    model = train_ngram(training_texts(repos, tasks), args.order, args.alpha)
    Path(args.out).write_text(model.to_json(), encoding="utf-8")
    print(f"trained order-{model.order} model, vocabulary {model.vocab.size} -> {args.out}")
    return EXIT_OK


def cmd_complete(args) -> int:
    tasks = load_tasks(args.task_file)
    if args.task_id:
        matches = [t for t in tasks if t.task_id == args.task_id]
        if not matches:
            raise ConfigError(f"no task {args.task_id!r} in {args.task_file}")
        task = matches[0]
    elif tasks:
        task = tasks[0]
    else:
        raise ConfigError(f"{args.task_file} holds no tasks")
    config = StrategyConfig(**_settings(args))
    repo_dir = Path(args.repo) if args.repo else _repos_dir(args) / task.repo
    index_file = repo_dir / INDEX_PATH
    if not index_file.exists():
        raise MissingArtifact(f"no index at {index_file}; run `stallkit index {repo_dir}` first")
    index = SymbolIndex.from_json(index_file.read_text(encoding="utf-8"))
    repo = load_repo(repo_dir)
    if os.environ.get(BACKEND_ENV) or args.model:
        backend = _backend(args)
    else:
        all_repos = _load_all_repos(_repos_dir(args), [t.repo for t in tasks]) if not args.repo else [repo]
        backend = _backend(args, all_repos, tasks)
    engine = CompletionEngine(repo, index, backend)
    result = engine.complete(task, config)
    if args.dump_prompt:
        for seg in result.bundle.segments:
            print(f"=== {seg.kind} ({seg.token_count} tokens) ===")
            print(seg.text)
        print(f"=== total {result.bundle.total_tokens} tokens ===")
    print(result.prediction)
    return EXIT_OK


def _matrix(args, settings) -> list[str]:
    if args.combo:
        return list(args.combo)
    if args.matrix == "full":
        return list(PAPER_COMBOS)
    enabled = {name for name in FLAG_FIELDS if settings.get(name)}
    labels = []
    for label in PAPER_COMBOS:
        flags = {n for n in FLAG_FIELDS if getattr(StrategyConfig.from_label(label), n)}
        if flags <= enabled:
            labels.append(label)
    return labels


def cmd_bench(args) -> int:
    settings = _settings(args)
    base = {k: v for k, v in settings.items() if k not in FLAG_FIELDS}
    configs = [StrategyConfig.from_label(label, **base) for label in _matrix(args, settings)]
    tasks = load_tasks(args.task_file)
    if not tasks:
        raise ConfigError(f"{args.task_file} holds no tasks")
    if args.subset:
        key, _, value = args.subset.partition("=")
        want = value.lower() in ("1", "true", "yes")
        tasks = [t for t in tasks if bool(t.meta.get(key)) == want]
    repos = _load_all_repos(_repos_dir(args), [t.repo for t in tasks])
    backend = _backend(args, repos, tasks)
    bench = build_bench(repos, tasks, backend=backend)
    reports = [bench.run(tasks, cfg, jobs=args.jobs) for cfg in configs]
    for r in reports:
        for item in r.items:
            if item.error:
                print(f"[{r.label}] {item.task_id}: {item.error}", file=sys.stderr)
    print(metrics_table(reports))
    print()
    print(latency_table(reports))
    if args.json:
        payload = [r.to_dict(include_timing=not args.no_timing) for r in reports]
        Path(args.json).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _strategy_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("strategies")
    g.add_argument("--prompt-f", dest="prompt_f", action="store_true", help="file-level dependency context")
    g.add_argument("--prompt-t", dest="prompt_t", action="store_true", help="token-level dependency context")
    g.add_argument("--decode", action="store_true", help="mask invalid member names while decoding")
    g.add_argument("--post", action="store_true", help="pick the first beam candidate that passes checking")
    g.add_argument("--rag", action="store_true", help="prepend retrieved snippets")
    g.add_argument("--allow-slow", dest="allow_slow", action="store_true", help="permit decode together with post")
    g.add_argument("--config", help="key=value file of StrategyConfig fields")
    for name, kind in (("in-file-tokens", int), ("per-crossfile-tokens", int), ("retrieved-k", int),
                       ("max-new-tokens", int), ("beam-width", int), ("drop-rate", float),
                       ("noise-rate", float), ("perturb-seed", int)):
        g.add_argument(f"--{name}", dest=name.replace("-", "_"), type=kind)


def _model_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("reference model")
    g.add_argument("--model", help="serialized n-gram model (default: train on the corpus)")
    g.add_argument("--order", type=int, default=3)
    g.add_argument("--alpha", type=float, default=0.1)
    g.add_argument("--priming", type=float, default=0.8)
    g.add_argument("--repos", help="directory of repositories (default: <task file dir>/repos)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stallkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build and store a repository's symbol index")
    p.add_argument("repo_dir")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("gen", help="generate a synthetic corpus")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--repos", dest="repos_count", type=int, default=30)
    p.add_argument("--tasks-per-repo", type=int, default=10)
    p.add_argument("--distractors", type=int, default=2)
    p.add_argument("--unique-fraction", type=float, default=0.5)
    p.add_argument("--unseen-fraction", type=float, default=0.8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train and save the reference n-gram model")
    p.add_argument("task_file")
    p.add_argument("--out", required=True)
    _model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("complete", help="complete one task")
    p.add_argument("task_file")
    p.add_argument("--task-id")
    p.add_argument("--repo", help="repository directory (default: <repos>/<task repo>)")
    p.add_argument("--dump-prompt", action="store_true")
    _strategy_flags(p)
    _model_flags(p)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("bench", help="run a strategy matrix over a task file")
    p.add_argument("task_file")
    p.add_argument("--combo", action="append", help="strategy label such as In-file, Prompt-F, RAG+F+D, decode,post")
    p.add_argument("--matrix", choices=["full"], help="every combination evaluated in the paper")
    p.add_argument("--subset", help="meta filter such as unseen=true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--json", help="write the reports here")
    p.add_argument("--no-timing", action="store_true", help="omit timing fields from the JSON")
    _strategy_flags(p)
    _model_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BackendUnavailable as err:
        print(f"error: backend unavailable: {err}", file=sys.stderr)
        return EXIT_BACKEND
    except (MissingArtifact, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_MISSING
    except StallkitError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
