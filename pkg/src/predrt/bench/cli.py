"""Command-line front end of the benchmark harness.

    python -m predrt.bench [CONFIG] [--bench ...] [--policy ...] ...

Flags override keys read from CONFIG.  Exit status: 0 on success, 2 on a
configuration error, 1 when a run failed its replay validation.
"""
from __future__ import annotations

import argparse
import sys

from .harness import (ConfigError, build_config, read_config_items, run_suite,
                      write_results)

# flag -> config key
_FLAGS = [
    ("--bench", "bench", "benchmarks, comma separated: kind or kind:granularity"),
    ("--policy", "policy", "busy, idle, hybrid[:polls], prediction (comma separated)"),
    ("--backend", "backend", "virtual (deterministic) or real (threads)"),
    ("--cpus", "cpus", "number of CPUs"),
    ("--pred-rate-us", "pred_rate_us", "prediction period in microseconds"),
    ("--ema-decay", "ema_decay", "weight of the newest ratio in the moving average"),
    ("--min-cpus", "min_cpus", "lower clamp of the predicted CPU count"),
    ("--seed", "seed", "base seed; repetition r uses seed + r"),
    ("--reps", "reps", "repetitions per cell (default 5)"),
    ("--noise-sigma", "noise_sigma", "lognormal duration noise, 0 for exact"),
    ("--out-dir", "out_dir", "output directory"),
    ("--mode", "mode", "suite or overhead"),
    ("--share-with", "share_with", "peer benchmark; runs two runtimes on one CPU set"),
    ("--share-policy", "share_policy", "lewi, hybrid[:polls], prediction (comma separated)"),
]


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="python -m predrt.bench",
        description="Run synthetic task benchmarks under CPU management policies "
                    "and write makespan, energy, EDP and accuracy CSVs.")
    p.add_argument("config", nargs="?", help="flat key = value config file")
    for flag, key, help_ in _FLAGS:
        p.add_argument(flag, dest=key, help=help_)
    p.add_argument("--emit-trace", action="store_true", default=None,
                   help="also write every run's event log")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="any config key, e.g. fine_grain_stress.tasks=100000")
    p.add_argument("--quiet", action="store_true", help="do not print the means table")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        items = read_config_items(args.config) if args.config else []
        for _, key, _ in _FLAGS:
            value = getattr(args, key)
            if value is not None:
                items.append((key, value, "--" + key.replace("_", "-")))
        if args.emit_trace:
            items.append(("emit_trace", "true", "--emit-trace"))
        for kv in args.set:
            key, sep, value = kv.partition("=")
            if not sep:
                raise ConfigError(f"expected KEY=VALUE, got {kv!r}", "--set")
            items.append((key, value, "--set"))
        cfg = build_config(items)
        cfg.check(args.config or "command line")
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    res = run_suite(cfg)
    paths = write_results(res)
    if not args.quiet:
        with open(paths[1]) as fh:
            sys.stdout.write(fh.read())
        if res.overhead:
            for o in res.overhead:
                print(f"{o['benchmark']}: monitoring overhead "
                      f"{100 * o['relative_overhead']:+.2f}%")
        print(f"wrote {len(paths)} files to {cfg.out_dir}")
    if res.violations:
        n = sum(len(v) for v in res.violations.values())
        print(f"{n} validation failures, see violations.txt", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
