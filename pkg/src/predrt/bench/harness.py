"""Suite orchestration: config parsing, repeated runs, CSV emission.

A config file is flat ``key = value`` text; ``#`` starts a comment.  List
values are comma separated.  Recognised keys::

    bench          benchmark list, each ``kind`` or ``kind:granularity``
    policy         busy, idle, hybrid[:polls], prediction (list)
    backend        virtual | real
    cpus           CPU count (the whole shared set when sharing)
    pred_rate_us   prediction period
    ema_decay      unitary-cost smoothing factor
    min_cpus       lower clamp of the prediction
    seed           base seed; repetition r uses seed + r
    reps           repetitions per cell
    noise_sigma    lognormal duration noise (0 = exact)
    out_dir        where result files go
    emit_trace     also write every run's event log
    mode           suite | overhead
    share_with     peer benchmark; enables the two-runtime scenario
    share_policy   lewi, hybrid[:polls], prediction (list)
    validate       replay-check every run (default on)

Any other key of the form ``<kind>.<param>`` overrides a generator size
parameter, e.g. ``fine_grain_stress.tasks = 100000``.
"""
from __future__ import annotations

import csv
import io
import os
from collections import defaultdict
from dataclasses import dataclass, field, replace

import numpy as np

from .. import cpu_manager as cm
from .. import sharing as sh
from ..energy import EnergyReport, compute_edp, report_csv
from ..engine import run_shared_virtual, run_virtual
from ..threaded import run_threaded
from ..validate import validate_run
from .generators import DEFAULTS, KINDS, BenchmarkSpec, SpecError, generate

BACKENDS = ("virtual", "real")
MODES = ("suite", "overhead")


class ConfigError(ValueError):
    """Bad configuration; ``where`` is ``file:line`` or the offending flag."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


@dataclass
class RunConfig:
    benchmarks: list = field(default_factory=list)
    policies: list = field(default_factory=lambda: ["busy", "idle", "prediction"])
    backend: str = "virtual"
    n_cpus: int = 8
    period_us: float = 50.0
    ema_decay: float = 0.5
    min_cpus: int = 1
    seed: int = 0
    repetitions: int = 5
    noise_sigma: float = 0.1
    out_dir: str = "results"
    emit_trace: bool = False
    mode: str = "suite"
    share_with: BenchmarkSpec | None = None
    share_policies: list = field(default_factory=lambda: ["lewi", "prediction"])
    validate: bool = True

    def check(self, where: str = "") -> None:
        if not self.benchmarks:
            raise ConfigError("no benchmark given", where)
        if self.repetitions < 1:
            raise ConfigError("reps must be >= 1", where)
        if self.n_cpus < 1:
            raise ConfigError("cpus must be >= 1", where)
        if self.period_us <= 0:
            raise ConfigError("pred_rate_us must be > 0", where)
        if not 0 < self.ema_decay <= 1:
            raise ConfigError("ema_decay must lie in (0, 1]", where)
        if not 1 <= self.min_cpus <= self.n_cpus:
            raise ConfigError("min_cpus must lie in [1, cpus]", where)
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}", where)
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}", where)
        if self.share_with is not None:
            if self.backend != "virtual":
                raise ConfigError("the sharing scenario needs the virtual backend", where)
            if self.n_cpus % 2:
                raise ConfigError("sharing splits cpus in two halves; use an even count",
                                  where)


# parsing --------------------------------------------------------------------

def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _bench_token(tok: str, sigma: float, params: dict) -> BenchmarkSpec:
    kind, _, gran = tok.partition(":")
    kind = kind.strip()
    if kind not in KINDS:
        raise ValueError(f"unknown benchmark {kind!r} (known: {', '.join(KINDS)})")
    gran = gran.strip() or "fine"
    own = {k: v for k, v in params.get(kind, {}).items()
           if k in DEFAULTS.get((kind, gran), {}) or k == "create_cost_us"}
    return BenchmarkSpec(kind, gran, own, sigma)


def _policy_token(tok: str) -> str:
    return str(cm.Policy.parse(tok))


def _share_token(tok: str) -> str:
    p = sh.SharingPolicy.parse(tok)
    return p.kind if p.kind != sh.HYBRID else f"hybrid:{p.spin_budget}"


_SCALARS = {
    "backend": ("backend", str),
    "cpus": ("n_cpus", int),
    "pred_rate_us": ("period_us", float),
    "ema_decay": ("ema_decay", float),
    "min_cpus": ("min_cpus", int),
    "seed": ("seed", int),
    "reps": ("repetitions", int),
    "noise_sigma": ("noise_sigma", float),
    "out_dir": ("out_dir", str),
    "emit_trace": ("emit_trace", _bool),
    "mode": ("mode", str),
    "validate": ("validate", _bool),
}


def build_config(items: list[tuple[str, str, str]]) -> RunConfig:
    """Build a :class:`RunConfig` from ``(key, value, where)`` triples.

    Later items override earlier ones, so CLI flags can follow file lines.
    """
    cfg = RunConfig()
    bench_raw = share_raw = None
    params: dict[str, dict] = defaultdict(dict)
    for key, value, where in items:
        key = key.strip().replace("-", "_")
        value = value.strip()
        try:
            if key in _SCALARS:
                attr, conv = _SCALARS[key]
                setattr(cfg, attr, conv(value))
            elif key == "bench":
                bench_raw = (_list(value), where)
            elif key == "policy":
                cfg.policies = [_policy_token(t) for t in _list(value)]
                if not cfg.policies:
                    raise ValueError("empty policy list")
            elif key == "share_with":
                share_raw = (value, where) if value else None
            elif key == "share_policy":
                cfg.share_policies = [_share_token(t) for t in _list(value)]
                if not cfg.share_policies:
                    raise ValueError("empty share_policy list")
            elif "." in key:
                kind, _, param = key.partition(".")
                if kind not in KINDS:
                    raise ValueError(f"unknown benchmark {kind!r}")
                known = set().union(*(DEFAULTS[(kind, g)] for g in ("fine", "coarse")))
                if param not in known | {"create_cost_us"}:
                    raise ValueError(f"{kind} has no parameter {param!r}")
                params[kind][param] = float(value)
            else:
                raise ValueError(f"unknown key {key!r}")
        except (ValueError, SpecError) as exc:
            raise ConfigError(str(exc), where) from None
    # benchmarks are resolved last so parameter overrides apply wherever
    # they appear
    for raw, attr in ((bench_raw, "benchmarks"), (share_raw, "share_with")):
        if raw is None:
            continue
        value, where = raw
        try:
            if attr == "benchmarks":
                cfg.benchmarks = [_bench_token(t, cfg.noise_sigma, params) for t in value]
            else:
                cfg.share_with = _bench_token(value, cfg.noise_sigma, params)
        except (ValueError, SpecError) as exc:
            raise ConfigError(str(exc), where) from None
    return cfg


def read_config_items(path: str) -> list[tuple[str, str, str]]:
    items = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            key, sep, value = text.partition("=")
            where = f"{path}:{lineno}"
            if not sep or not key.strip():
                raise ConfigError(f"expected 'key = value', got {line.strip()!r}", where)
            items.append((key.strip(), value, where))
    return items


def load_config(path: str, overrides: list[tuple[str, str, str]] = ()) -> RunConfig:
    cfg = build_config(read_config_items(path) + list(overrides))
    cfg.check(path)
    return cfg


# running --------------------------------------------------------------------

RUN_FIELDS = ["run_id", "benchmark", "peer", "policy", "backend", "seed", "rep",
              "n_cpus", "makespan_us", "energy", "edp", "accuracy_pct",
              "arbiter_calls", "predictions", "transitions", "violations"]
MEAN_FIELDS = ["benchmark", "peer", "policy", "backend", "runs", "makespan_us",
               "energy", "edp", "accuracy_pct", "arbiter_calls"]
OVERHEAD_FIELDS = ["benchmark", "backend", "reps", "makespan_busy_us",
                   "makespan_monitored_us", "relative_overhead"]


@dataclass
class RunRow:
    run_id: str
    benchmark: str
    peer: str
    policy: str
    backend: str
    seed: int
    rep: int
    n_cpus: int
    makespan_us: float
    energy: float | None
    edp: float | None
    accuracy_pct: float | None
    arbiter_calls: int | None
    predictions: int
    transitions: int
    violations: int


@dataclass
class SuiteResult:
    config: RunConfig
    rows: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    accuracy: dict = field(default_factory=dict)   # run_id -> csv text
    arbiter: dict = field(default_factory=dict)    # run_id -> csv text
    traces: dict = field(default_factory=dict)     # run_id -> log text
    overhead: list = field(default_factory=list)
    violations: dict = field(default_factory=dict)  # run_id -> list[str]

    def means(self) -> list[dict]:
        groups: dict[tuple, list] = {}
        for r in self.rows:
            groups.setdefault((r.benchmark, r.peer, r.policy, r.backend), []).append(r)
        out = []
        for (bench, peer, policy, backend), rs in groups.items():
            out.append(dict(benchmark=bench, peer=peer, policy=policy, backend=backend,
                            runs=len(rs),
                            makespan_us=_mean([r.makespan_us for r in rs]),
                            energy=_mean([r.energy for r in rs]),
                            edp=_mean([r.edp for r in rs]),
                            accuracy_pct=_mean([r.accuracy_pct for r in rs]),
                            arbiter_calls=_mean([r.arbiter_calls for r in rs])))
        return out


def _mean(xs):
    if any(x is None for x in xs):
        return None
    return float(np.mean(xs))


def _fmt(x, spec=".6f"):
    if x is None:
        return "NA"
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(x, spec)


def _row_values(row: RunRow) -> list[str]:
    return [_fmt(getattr(row, f)) if not isinstance(getattr(row, f), str)
            else getattr(row, f) for f in RUN_FIELDS]


def _record(res: SuiteResult, run_id, bench, peer, policy, seed, rep, result,
            arbiter=None, strict=True, sharing_gate=False, trace=True) -> None:
    cfg = res.config
    viol = []
    if cfg.validate and trace:
        viol = validate_run(result, arbiter, strict=strict, sharing_gate=sharing_gate)
        if viol:
            res.violations[run_id] = viol
    energy = None
    if trace:
        energy = compute_edp(result.log, makespan=result.makespan_us, run_id=run_id)
        res.energy.append(energy)
    acc = None
    if result.monitor is not None:
        report = result.monitor.accuracy_report()
        res.accuracy[run_id] = report.to_csv()
        acc = report.overall.avg_accuracy_pct
    calls = None
    if arbiter is not None:
        calls = arbiter.counters[result.log.runtime_id].total
    if cfg.emit_trace and trace:
        res.traces[run_id] = result.log.dumps()
    res.rows.append(RunRow(
        run_id, bench, peer, policy, cfg.backend, seed, rep, result.log.n_cpus,
        result.makespan_us,
        None if energy is None else energy.energy,
        None if energy is None else energy.edp,
        acc, calls, result.predictions, result.transitions, len(viol)))


def _single(cfg: RunConfig, wl, policy: str, monitoring: bool = True, trace: bool = True):
    if cfg.backend == "virtual":
        return run_virtual(wl, policy, n_cpus=cfg.n_cpus, period_us=cfg.period_us,
                           ema_decay=cfg.ema_decay, min_cpus=cfg.min_cpus,
                           monitoring=monitoring)
    return run_threaded(wl, policy, n_cpus=cfg.n_cpus, period_us=cfg.period_us,
                        ema_decay=cfg.ema_decay, min_cpus=cfg.min_cpus,
                        monitoring=monitoring, trace=trace)


def _run_cells(cfg: RunConfig, res: SuiteResult) -> None:
    strict = cfg.backend == "virtual"
    for spec in cfg.benchmarks:
        for rep in range(cfg.repetitions):
            seed = cfg.seed + rep
            wl = generate(spec, seed)
            for policy in cfg.policies:
                result = _single(cfg, wl, policy)
                _record(res, f"{spec.name}.{policy}.{rep}", spec.name, "", policy,
                        seed, rep, result, strict=strict)


def _run_shared(cfg: RunConfig, res: SuiteResult) -> None:
    peer = cfg.share_with
    for spec in cfg.benchmarks:
        for rep in range(cfg.repetitions):
            seed = cfg.seed + rep
            pair = (generate(spec, seed), generate(peer, seed + 1))
            names = (spec.name, peer.name)
            for policy in cfg.share_policies:
                shared = run_shared_virtual(pair, policy, cpus_each=cfg.n_cpus // 2,
                                            period_us=cfg.period_us,
                                            ema_decay=cfg.ema_decay)
                base = f"{names[0]}+{names[1]}.share-{policy}.{rep}"
                res.arbiter[base] = shared.arbiter.report_csv()
                gate = policy == sh.PREDICTION
                for i, result in enumerate(shared.results):
                    _record(res, f"{base}.rt{i}", names[i], names[1 - i],
                            f"share-{policy}", seed + i, rep, result,
                            arbiter=shared.arbiter, sharing_gate=gate)


def _run_overhead(cfg: RunConfig, res: SuiteResult) -> None:
    """Busy with and without monitoring, interleaved per repetition."""
    trace = cfg.backend == "virtual"
    for spec in cfg.benchmarks:
        plain, monitored = [], []
        for rep in range(cfg.repetitions):
            seed = cfg.seed + rep
            wl = generate(spec, seed)
            for label, mon, bucket in (("busy", False, plain),
                                       ("busy+monitoring", True, monitored)):
                result = _single(cfg, wl, "busy", monitoring=mon, trace=trace)
                bucket.append(result.makespan_us)
                _record(res, f"{spec.name}.{label}.{rep}", spec.name, "", label, seed,
                        rep, result, strict=trace, trace=trace)
        a, b = float(np.mean(plain)), float(np.mean(monitored))
        res.overhead.append(dict(benchmark=spec.name, backend=cfg.backend,
                                 reps=cfg.repetitions, makespan_busy_us=a,
                                 makespan_monitored_us=b,
                                 relative_overhead=b / a - 1.0 if a > 0 else 0.0))


def run_suite(cfg: RunConfig) -> SuiteResult:
    """Run every cell of ``cfg``; nothing is written to disk."""
    cfg.check()
    res = SuiteResult(cfg)
    if cfg.mode == "overhead":
        _run_overhead(cfg, res)
    elif cfg.share_with is not None:
        _run_shared(cfg, res)
    else:
        _run_cells(cfg, res)
    return res


# output ---------------------------------------------------------------------

def runs_csv(res: SuiteResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_FIELDS)
    for r in res.rows:
        w.writerow(_row_values(r))
    return buf.getvalue()


def means_csv(res: SuiteResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MEAN_FIELDS)
    for m in res.means():
        w.writerow([m[f] if isinstance(m[f], str) else _fmt(m[f]) for f in MEAN_FIELDS])
    return buf.getvalue()


def overhead_csv(res: SuiteResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(OVERHEAD_FIELDS)
    for o in res.overhead:
        w.writerow([o[f] if isinstance(o[f], str) else _fmt(o[f]) for f in OVERHEAD_FIELDS])
    return buf.getvalue()


def _safe(run_id: str) -> str:
    return run_id.replace(":", "_").replace("+", "__")


def write_results(res: SuiteResult, out_dir: str | None = None) -> list[str]:
    """Write every result file; returns the paths written."""
    out = out_dir or res.config.out_dir
    os.makedirs(out, exist_ok=True)
    files = {"runs.csv": runs_csv(res), "means.csv": means_csv(res)}
    if res.energy:
        files["energy.csv"] = report_csv(res.energy)
    if res.overhead:
        files["overhead.csv"] = overhead_csv(res)
    for run_id, text in res.accuracy.items():
        files[os.path.join("accuracy", _safe(run_id) + ".csv")] = text
    for run_id, text in res.arbiter.items():
        files[os.path.join("arbiter", _safe(run_id) + ".csv")] = text
    for run_id, text in res.traces.items():
        files[os.path.join("traces", _safe(run_id) + ".log")] = text
    if res.violations:
        files["violations.txt"] = "".join(
            f"{run_id}: {v}\n" for run_id, vs in res.violations.items() for v in vs)
    written = []
    for rel, text in files.items():
        path = os.path.join(out, rel)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
        written.append(path)
    return written


def energy_of(res: SuiteResult, run_id: str) -> EnergyReport:
    for e in res.energy:
        if e.run_id == run_id:
            return e
    raise KeyError(run_id)


def with_params(spec: BenchmarkSpec, **params) -> BenchmarkSpec:
    return replace(spec, params={**spec.params, **params})
