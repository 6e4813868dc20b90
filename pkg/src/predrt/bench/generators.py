"""Synthetic task DAGs for the benchmark suite.

Every generator is a pure function of ``(spec, seed)``.  Task durations
follow ``base_us * cost * noise`` where ``noise`` is a mean-one lognormal
factor ``exp(sigma * z - sigma**2 / 2)``; ``noise_sigma = 0`` gives exact,
cost-proportional durations.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from ..workload import Workload

KINDS = ("cholesky_dag", "multisaxpy", "gauss_seidel_barrier", "stream_like",
         "two_phase_fig1", "fine_grain_stress")
GRANULARITIES = ("fine", "coarse")


class SpecError(ValueError):
    pass


# size parameters and defaults per (kind, granularity)
DEFAULTS = {
    ("cholesky_dag", "fine"): dict(tiles=12, base_us=8.0),
    ("cholesky_dag", "coarse"): dict(tiles=6, base_us=200.0),
    ("multisaxpy", "fine"): dict(blocks=64, iterations=40, block_cost=4.0, base_us=5.0),
    ("multisaxpy", "coarse"): dict(blocks=16, iterations=40, block_cost=16.0, base_us=5.0),
    ("gauss_seidel_barrier", "fine"): dict(steps=100, width=256, base_us=2.0,
                                           min_cost=100, max_cost=400),
    ("gauss_seidel_barrier", "coarse"): dict(steps=40, width=64, base_us=8.0,
                                             min_cost=100, max_cost=400),
    ("stream_like", "fine"): dict(waves=40, width=256, base_us=200.0),
    ("stream_like", "coarse"): dict(waves=40, width=64, base_us=400.0),
    ("two_phase_fig1", "fine"): dict(alpha_waves=10, beta_waves=20, base_us=400.0),
    ("two_phase_fig1", "coarse"): dict(alpha_waves=10, beta_waves=20, base_us=400.0),
    ("fine_grain_stress", "fine"): dict(tasks=1_000_000, min_cost=1, max_cost=10,
                                        base_us=1.0, create_cost_us=1.0),
    ("fine_grain_stress", "coarse"): dict(tasks=1_000_000, min_cost=1, max_cost=10,
                                          base_us=1.0, create_cost_us=1.0),
}

_INT_PARAMS = {"tiles", "blocks", "iterations", "steps", "width", "waves",
               "alpha_waves", "beta_waves", "tasks", "min_cost", "max_cost"}


@dataclass(frozen=True)
class BenchmarkSpec:
    kind: str
    granularity: str = "fine"
    params: dict = field(default_factory=dict)
    noise_sigma: float = 0.1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown benchmark {self.kind!r}")
        if self.granularity not in GRANULARITIES:
            raise SpecError(f"unknown granularity {self.granularity!r}")
        if self.noise_sigma < 0:
            raise SpecError("noise_sigma must be >= 0")
        known = DEFAULTS[(self.kind, self.granularity)]
        for k, v in self.params.items():
            if k not in known and k != "create_cost_us":
                raise SpecError(f"{self.kind} has no parameter {k!r}")
            if k in _INT_PARAMS and (int(v) != v or v < 1):
                raise SpecError(f"{self.kind}.{k} must be a positive integer, got {v!r}")
            if k not in _INT_PARAMS and not v > 0:
                raise SpecError(f"{self.kind}.{k} must be positive, got {v!r}")

    def resolved(self) -> dict:
        p = dict(DEFAULTS[(self.kind, self.granularity)])
        p.update(self.params)
        for k in _INT_PARAMS & p.keys():
            p[k] = int(p[k])
        return p

    @property
    def name(self) -> str:
        return f"{self.kind}-{self.granularity}"


def noise(rng: np.random.Generator, n: int, sigma: float) -> np.ndarray:
    if sigma == 0:
        return np.ones(n)
    return np.exp(sigma * rng.standard_normal(n) - 0.5 * sigma * sigma)


class _Builder:
    """Accumulates tasks in creation order."""

    def __init__(self, labels):
        self.labels = list(labels)
        self.tt: list[int] = []
        self.cost: list[float] = []
        self.ptr = [0]
        self.idx: list[int] = []
        self.stages = [0]

    def add(self, t: int, cost: float, deps=()) -> int:
        self.tt.append(t)
        self.cost.append(cost)
        self.idx.extend(deps)
        self.ptr.append(len(self.idx))
        return len(self.tt) - 1

    def barrier(self) -> None:
        if self.stages[-1] != len(self.tt):
            self.stages.append(len(self.tt))

    def build(self, name, rng, sigma, base_us, create_cost_us=0.5, meta=None) -> Workload:
        self.barrier()
        cost = np.asarray(self.cost, dtype=np.float64)
        dur = base_us * cost * noise(rng, len(cost), sigma)
        return Workload(
            name=name, type_labels=self.labels,
            task_type=np.asarray(self.tt, dtype=np.int32), cost=cost, duration=dur,
            dep_ptr=np.asarray(self.ptr, dtype=np.int64),
            dep_idx=np.asarray(self.idx, dtype=np.int64),
            stage_ptr=np.asarray(self.stages, dtype=np.int64),
            create_cost_us=create_cost_us, meta=meta or {})


def cholesky_counts(n: int) -> dict:
    """Closed-form task counts of the tile Cholesky DAG on ``n x n`` tiles."""
    return {"potrf": n, "trsm": comb(n, 2), "syrk": comb(n, 2), "gemm": comb(n, 3)}


def _cholesky(p, rng, sigma, name):
    n = p["tiles"]
    # relative flop counts of the tile kernels: b^3/3, b^3, b^3, 2b^3
    b = _Builder(["potrf", "trsm", "syrk", "gemm"])
    cost = (1.0, 3.0, 3.0, 6.0)
    writer: dict[tuple, int] = {}

    def task(t, reads, write):
        deps = {writer[x] for x in (*reads, write) if x in writer}
        writer[write] = b.add(t, cost[t], sorted(deps))

    for k in range(n):
        task(0, (), (k, k))
        for i in range(k + 1, n):
            task(1, ((k, k),), (i, k))
        for i in range(k + 1, n):
            task(2, ((i, k),), (i, i))
            for j in range(k + 1, i):
                task(3, ((i, k), (j, k)), (i, j))
    return b.build(name, rng, sigma, p["base_us"], p.get("create_cost_us", 0.5),
                   {"tiles": n})


def _multisaxpy(p, rng, sigma, name):
    nb, it = p["blocks"], p["iterations"]
    b = _Builder(["saxpy"])
    last = [None] * nb
    for _ in range(it):
        for blk in range(nb):
            deps = () if last[blk] is None else (last[blk],)
            last[blk] = b.add(0, p["block_cost"], deps)
    return b.build(name, rng, sigma, p["base_us"], p.get("create_cost_us", 0.5))


def _gauss_seidel(p, rng, sigma, name):
    b = _Builder(["gs_block"])
    lo, hi = p["min_cost"], p["max_cost"]
    if lo > hi:
        raise SpecError("min_cost must not exceed max_cost")
    for _ in range(p["steps"]):
        for c in rng.integers(lo, hi + 1, p["width"]).tolist():
            b.add(0, float(c))
        b.barrier()
    return b.build(name, rng, sigma, p["base_us"], p.get("create_cost_us", 0.5))


_STREAM_KERNELS = (("copy", 2.0), ("scale", 2.0), ("add", 3.0), ("triad", 3.0))


def _stream(p, rng, sigma, name):
    b = _Builder([k for k, _ in _STREAM_KERNELS])
    for w in range(p["waves"]):
        t = w % len(_STREAM_KERNELS)
        for _ in range(p["width"]):
            b.add(t, _STREAM_KERNELS[t][1])
        b.barrier()
    # base_us is the time of one average kernel instance
    return b.build(name, rng, sigma, p["base_us"] / 2.5, p.get("create_cost_us", 0.5))


def _two_phase(p, rng, sigma, name):
    """Six task chains, then four chains plus a lane that is busy half the time."""
    A, B = p["alpha_waves"], p["beta_waves"]
    b = _Builder(["alpha", "beta", "lane"])
    last = [None] * 6
    for _ in range(A):
        for c in range(6):
            last[c] = b.add(0, 1.0, () if last[c] is None else (last[c],))
    chain0 = []
    lane = None
    for w in range(B):
        for c in range(4):
            last[c] = b.add(1, 1.0, (last[c],))
        chain0.append(last[0])
        if w % 2 == 0:
            # the lane task runs next to every other beta wave
            deps = (chain0[-1],) if lane is None else (chain0[-1], lane)
            lane = b.add(2, 1.0, deps)
    wl = b.build(name, rng, sigma, p["base_us"], p.get("create_cost_us", 0.5),
                 {"alpha_tasks": 6 * A})
    return wl


def _fine_grain(p, rng, sigma, name):
    n = p["tasks"]
    lo, hi = p["min_cost"], p["max_cost"]
    if lo > hi:
        raise SpecError("min_cost must not exceed max_cost")
    cost = rng.integers(lo, hi + 1, n).astype(np.float64)
    dur = p["base_us"] * cost * noise(rng, n, sigma)
    return Workload(name=name, type_labels=["tiny"],
                    task_type=np.zeros(n, dtype=np.int32), cost=cost, duration=dur,
                    dep_ptr=np.zeros(n + 1, dtype=np.int64),
                    dep_idx=np.zeros(0, dtype=np.int64),
                    stage_ptr=np.array([0, n], dtype=np.int64),
                    create_cost_us=p.get("create_cost_us", 1.0))


_GENERATORS = {
    "cholesky_dag": _cholesky,
    "multisaxpy": _multisaxpy,
    "gauss_seidel_barrier": _gauss_seidel,
    "stream_like": _stream,
    "two_phase_fig1": _two_phase,
    "fine_grain_stress": _fine_grain,
}


def generate(spec: BenchmarkSpec, seed: int = 0) -> Workload:
    """Deterministic task DAG for ``(spec, seed)``."""
    rng = np.random.default_rng(seed)
    return _GENERATORS[spec.kind](spec.resolved(), rng, spec.noise_sigma, spec.name)


def sharing_pair(noise_sigma: float = 0.1) -> tuple[BenchmarkSpec, BenchmarkSpec]:
    """Two runtimes that complement each other on one CPU set.

    The Gauss-Seidel side has as many slightly coarse tasks per step as it
    owns CPUs, so every barrier leaves CPUs idle while the slowest task
    finishes; the stream side has long runs of fine-grained waves that can
    soak those CPUs up.  Sized for four CPUs per runtime.
    """
    gs = BenchmarkSpec("gauss_seidel_barrier", "coarse",
                       {"steps": 60, "width": 4, "base_us": 2.0}, noise_sigma)
    stream = BenchmarkSpec("stream_like", "fine",
                           {"waves": 125, "width": 256, "base_us": 3.0}, noise_sigma)
    return gs, stream
