"""
How many CPUs does a two-phase program need?
============================================

Six independent chains first, then four chains plus a lane that only has
work every other wave.  We run the same DAG under the three wait policies
and draw the number of occupied CPUs over time.
"""

import numpy as np

from predrt import run_virtual
from predrt.bench import BenchmarkSpec, generate
from predrt.energy import active_timeline, compute_edp

wl = generate(BenchmarkSpec("two_phase_fig1", "fine"), seed=0)
print(wl.n_tasks, "tasks, types", wl.type_labels)

runs = {p: run_virtual(wl, p, n_cpus=8) for p in ("busy", "idle", "prediction")}

# occupied CPUs sampled every 200 us, one character per sample
for policy, res in runs.items():
    times, counts = active_timeline(res.log, res.makespan_us)
    grid = np.arange(0.0, res.makespan_us, 200.0)
    at = counts[np.searchsorted(times, grid, side="right") - 1]
    print(f"{policy:>10} |{''.join(str(c) for c in at)}|")

# park/resume churn and the energy bill
for policy, res in runs.items():
    e = compute_edp(res.log)
    print(f"{policy:>10}  makespan {res.makespan_us:9.1f} us  "
          f"transitions {res.transitions:4d}  energy {e.energy:10.1f}  EDP {e.edp:.4g}")

# the predictor's view: what it asked for at each tick
pred = runs["prediction"]
targets = [r.task for r in pred.log if r.event == "prediction"]
print("targets:", targets[:12], "...", targets[-6:])
