# %% [markdown]
# # The strategy matrix
#
# Every combination of prompting, decoding and post-processing strategies
# on the default corpus, scored on the unseen tasks.

# %%
import numpy as np

from stallkit.bench import build_bench
from stallkit.corpusgen import generate
from stallkit.evalkit import latency_table, metrics_table

repos, tasks = generate(1)
bench = build_bench(repos, tasks)
unseen = [t.task_id for t in tasks if t.meta["unseen"]]
reports = [r.subset(unseen) for r in bench.run_matrix(tasks)]
print(metrics_table(reports))

# %% [markdown]
# Latency per phase. Decoding and post-processing pay for analyzer calls.

# %%
print(latency_table(reports))

# %%
em = np.array([r.line_em for r in reports])
best = reports[int(np.argmax(em))]
print("best:", best.label, round(best.line_em, 2))
