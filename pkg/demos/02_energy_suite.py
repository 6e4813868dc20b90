"""
Energy-delay across the benchmark suite
=======================================

Drives the harness from a config file, the same way the CLI does, and
compares the three wait policies per benchmark.  Output lands in
``results/suite`` next to this script.
"""

import os

from predrt.bench import load_config, run_suite, write_results

here = os.path.dirname(os.path.abspath(__file__))
cfg = load_config(os.path.join(here, "configs", "suite.cfg"))
res = run_suite(cfg)

# one row per (benchmark, policy), averaged over the repetitions
means = {(m["benchmark"], m["policy"]): m for m in res.means()}
for bench in sorted({b for b, _ in means}):
    busy = means[(bench, "busy")]
    line = [f"{bench:<28}"]
    for policy in cfg.policies:
        m = means[(bench, policy)]
        line.append(f"{policy} EDP x{m['edp'] / busy['edp']:.3f} "
                    f"time x{m['makespan_us'] / busy['makespan_us']:.3f}")
    print("  ".join(line))

# every run was replayed through the validator
print("runs with violations:", len(res.violations))

paths = write_results(res, os.path.join(here, "results", "suite"))
print("wrote", len(paths), "files, e.g.", os.path.relpath(paths[1], here))
