"""
What does monitoring cost on real threads?
==========================================

Busy-wait workers on OS threads, with and without the per-type
bookkeeping.  The task bodies spin on the wall clock, so the difference
is the price of the monitoring hooks themselves.  Pass a task count on
the command line to scale it (default 200 000).
"""

import os
import sys

from predrt.bench.harness import build_config, run_suite

tasks = sys.argv[1] if len(sys.argv) > 1 else "200000"
cfg = build_config([
    ("bench", "fine_grain_stress", "demo"),
    ("fine_grain_stress.tasks", tasks, "demo"),
    ("backend", "real", "demo"),
    ("cpus", str(os.cpu_count() or 1), "demo"),
    ("mode", "overhead", "demo"),
    ("reps", "3", "demo"),
])
res = run_suite(cfg)
for row in res.overhead:
    print(f"{row['benchmark']}: plain {row['makespan_busy_us'] / 1e6:.3f} s, "
          f"monitored {row['makespan_monitored_us'] / 1e6:.3f} s, "
          f"overhead {100 * row['relative_overhead']:+.1f}%")
