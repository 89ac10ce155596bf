# %% [markdown]
# # When the analyzer is wrong
#
# Dropping true members and adding false ones from the valid set shows how
# much the decoding strategy relies on analysis precision.

# %%
import numpy as np

from stallkit.bench import build_bench
from stallkit.corpusgen import generate
from stallkit.prompt import StrategyConfig

repos, tasks = generate(1)
bench = build_bench(repos, tasks)
unseen = [t for t in tasks if t.meta["unseen"]]

# %%
rows = []
for drop, noise in [(0.0, 0.0), (0.1, 0.2), (0.3, 0.5), (0.5, 0.8)]:
    row = [drop, noise]
    for label in ("Decode", "F+D", "F+P"):
        cfg = StrategyConfig.from_label(label, drop_rate=drop, noise_rate=noise)
        row.append(bench.run(unseen, cfg).line_em)
    rows.append(row)
table = np.array(rows)
print("drop noise  Decode    F+D    F+P")
for r in table:
    print("{:4.1f} {:5.1f} {:7.2f} {:6.2f} {:6.2f}".format(*r))

# %% [markdown]
# With the default smoothing (alpha = 0.1) the beam prefers short
# completions, so post-processing rarely finds the right line among its
# three candidates. Less smoothing changes that:

# %%
sharp = build_bench(repos, tasks, alpha=0.01)
for label in ("F+D", "F+P"):
    cfg = StrategyConfig.from_label(label, drop_rate=0.3, noise_rate=0.5)
    print(label, round(sharp.run(unseen, cfg).line_em, 2))
