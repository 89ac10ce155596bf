# %% [markdown]
# # Quickstart: one completion, four ways
#
# We generate a small synthetic corpus, build the reference n-gram model,
# and complete one task with the in-file baseline, with file-level context,
# and with constrained decoding.

# %%
from stallkit.analyzer import SourceFile, valid_identifiers_at
from stallkit.bench import build_bench
from stallkit.corpusgen import generate
from stallkit.prompt import StrategyConfig

repos, tasks = generate(1, n_repos=4)
bench = build_bench(repos, tasks)
task = next(t for t in tasks if t.meta["unseen"] and t.meta["unique_valid"])
engine = bench.engines[task.repo]
print(task.prompt.splitlines()[-1], "|", task.groundtruth)

# %% [markdown]
# The analyzer knows which members are legal after the dot.

# %%
valid = valid_identifiers_at(SourceFile(task.file, task.prompt), len(task.prompt), engine.index)
print(sorted(valid))

# %%
for label in ("In-file", "Prompt-F", "Decode", "Post"):
    result = engine.complete(task, StrategyConfig.from_label(label))
    print(f"{label:9s} -> {result.prediction!r}")

# %% [markdown]
# The prompt is just concatenated segments; here are their kinds and sizes.

# %%
bundle = engine.complete(task, StrategyConfig(prompt_f=True, rag=True)).bundle
for seg in bundle.segments:
    print(seg.kind, len(seg.text))
