"""
A single public-knowledge run
=============================

One population, one seed. We watch the public density drift away from the
heavy-tailed truth as agents lean on the cheap truncated source.
"""

import numpy as np

from knowledge_collapse import SimConfig, collapse_metrics, run_simulation
from knowledge_collapse.density import pdf_variance

# a discounted truncated source makes the tails expensive to learn about
cfg = SimConfig(delta=0.5, seed=7)
res = run_simulation(cfg)

print("final Hellinger distance:", round(res.final_hellinger, 3))
print("status:", res.status)

# distance every 20 rounds
traj = res.hellinger_trajectory
for r in range(0, traj.size, 20):
    print(f"round {r + 1:3d}  H = {traj[r]:.3f}")

# no discount: both sources cost the same, full draws win
flat = run_simulation(SimConfig(delta=1.0, seed=7))
print("delta=1.0 final distance:", round(flat.final_hellinger, 3))

# variance of the public density against the truth
m = collapse_metrics(res)
truth_var = pdf_variance(res.truth_pdf)
print("public variance: first %.3f, last %.3f, truth %.3f"
      % (m.variance_trajectory[0], m.variance_trajectory[-1], truth_var))
print("narrowing slope:", np.round(m.slope, 5))
