"""
Robustness curve for node classification
========================================

A small grid through the experiment harness: random additions and deletions
at increasing budgets, three embedding methods, three repetitions.  The
plot-ready rows put deletions on the negative budget axis.
"""

# %%
import tempfile

from nerobust.harness import emit_report, parse_config, plot_rows, run_experiment

CONFIG = """
[task]
train_fractions = 0.5
shuffles = 3
repetitions = 3
seed = 0

[data]
datasets = sbm:homo
homo.blocks = 100, 100, 100
homo.p_in = 0.1
homo.p_out = 0.03

[methods]
methods = hope, netmf, deepwalk
dim = 32
deepwalk.num_walks = 10
deepwalk.walk_length = 40
deepwalk.epochs = 1

[attacks]
attacks = add_rand, del_rand

[budgets]
budgets = 0, 0.2, 0.4, 0.6
"""

table = run_experiment(parse_config(CONFIG))
print(f"{len(table.raw)} raw rows, {len(table.aggregates)} aggregate rows")

# %%
# Mean f1_micro with its 95% interval, one line per method and signed budget.
rows = [r for r in plot_rows(table) if r["metric"] == "f1_micro"]
for r in sorted(rows, key=lambda r: (r["method"], r["x"])):
    print(f"{r['method']:9s} x={r['x']:+.1f}  f1={r['mean']:.3f}  "
          f"[{r['ci95_low']:.3f}, {r['ci95_high']:.3f}]")

# %%
# The same table as files: results, plot data, resolved config and a manifest
# with seeds and dataset checksums.
out = tempfile.mkdtemp(prefix="curve_")
for kind, path in sorted(emit_report(table, out).items()):
    print(kind, path)
