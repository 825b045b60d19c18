"""
Sweeping the truncation discount
================================

A small grid over the discount factor, a few replications per cell, and a
line chart of the mean final distance written as SVG.
"""

import pathlib
import tempfile

from knowledge_collapse import SimConfig, SweepGrid, aggregate, run_sweep
from knowledge_collapse.svg import distance_lines

# short runs keep this quick; the presets use 100 rounds and 30 seeds
grid = SweepGrid(
    axes={"delta": [1.0, 0.8, 0.5, 0.2]},
    replications=5,
    base=SimConfig(n_rounds=60),
    base_seed=11,
)
result = run_sweep(grid, workers=1)

rows = aggregate(result)
for row in rows:
    print(f"delta={row['delta']:<4} mean={row['mean']:.3f} std={row['std']:.3f} n={row['n']}")

svg = distance_lines(
    [("mean final distance", [(row["delta"], row["mean"]) for row in rows])],
    title="discount sweep",
    x_label="delta",
)
out = pathlib.Path(tempfile.mkdtemp()) / "discount.svg"
out.write_text(svg)
print("wrote", out)
