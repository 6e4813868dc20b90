"""Post-run consistency checks driven by the event log.

:func:`validate_run` replays a finished run's log and cross-checks it with
the task table, the monitor and (for shared runs) the arbiter history.  It
returns a list of human-readable violations; empty means the run is clean.

Checks:

* every task goes create -> ready -> start -> end exactly once, and starts
  only after all its dependencies ended,
* per type, the ready/executing workload and instance count folded over the
  log never go negative and return to zero; the monitor agrees at the end,
* slot transitions are legal and the occupied count stays in ``[0, N]``,
* under the prediction policy (virtual backend), parks only happen while the
  occupied count exceeds the latest prediction and resumes only while it is
  below it,
* every type's unitary cost lies within the hull of its observed
  ``execution_time / cost`` ratios, and matches a replayed moving average,
* for shared runs under the prediction policy, a runtime lends one of its
  own CPUs only while its occupied count exceeds its latest prediction,
* for shared runs, the arbiter history keeps a single consistent holder per
  CPU.
"""
from __future__ import annotations

import math

import numpy as np

from . import eventlog as el
from . import sharing as sh
from .energy import MalformedLogError, state_intervals

_FOLD_EPS = 1e-6


def _lifecycle(log, graph, out: list, strict: bool) -> None:
    a = log.arrays()
    n = len(graph.tasks)
    times = {}
    for code in (el.CREATE, el.READY, el.START, el.END):
        m = a["ev"] == code
        ids = a["task"][m]
        counts = np.bincount(ids, minlength=n) if len(ids) else np.zeros(n, int)
        if len(counts) > n or np.any(counts != 1):
            bad = int(np.flatnonzero(counts != 1)[0])
            out.append(f"task {bad} has {counts[bad]} {el.EVENTS[code]} events")
            return
        t = np.empty(n)
        t[ids] = a["t"][m]
        times[code] = t
    pairs = [(el.READY, el.START), (el.START, el.END)]
    if strict:
        pairs.insert(0, (el.CREATE, el.READY))
    for before, after in pairs:
        bad = np.flatnonzero(times[after] < times[before])
        if len(bad):
            out.append(f"task {int(bad[0])}: {el.EVENTS[after]} before {el.EVENTS[before]}")
    start, end = times[el.START], times[el.END]
    for task in graph.tasks:
        for d in task.dependencies:
            if start[task.id] < end[d]:
                out.append(f"task {task.id} started before dependency {d} ended")
                return


def _fold_workloads(log, graph, monitor, out: list) -> None:
    a = log.arrays()
    ev, task = a["ev"], a["task"]
    m = np.isin(ev, (el.READY, el.START, el.END))
    ev, task = ev[m], task[m]
    cost = np.array([t.cost for t in graph.tasks])
    ttype = np.array([t.task_type.id for t in graph.tasks], dtype=np.intp)
    n_types = len(graph.types)
    for j in range(n_types):
        sel = ttype[task] == j
        e, c = ev[sel], cost[task[sel]]
        d_ready = np.where(e == el.READY, c, np.where(e == el.START, -c, 0.0))
        d_exec = np.where(e == el.START, c, np.where(e == el.END, -c, 0.0))
        d_inst = np.where(e == el.READY, 1, np.where(e == el.END, -1, 0))
        label = graph.tasks[int(task[sel][0])].task_type.label if sel.any() else j
        for name, d in (("ready workload", d_ready), ("executing workload", d_exec),
                        ("instance count", d_inst)):
            run = np.cumsum(d)
            scale = max(1.0, float(np.abs(d).sum()))
            if len(run) and run.min() < -_FOLD_EPS * scale:
                out.append(f"type {label}: {name} goes negative")
            if len(run) and abs(run[-1]) > _FOLD_EPS * scale:
                out.append(f"type {label}: {name} ends at {run[-1]}")
    if monitor is not None:
        for s in monitor.snapshot():
            if s.ready != 0 or s.executing != 0 or s.instances != 0:
                out.append(f"type {s.label}: monitor not quiescent ({s})")


def _slots(log, makespan, out: list, prediction: bool, sharing_gate: bool,
           owned=None) -> None:
    try:
        state_intervals(log, makespan)
    except MalformedLogError as exc:
        out.append(str(exc))
        return
    a = log.arrays()
    ev, t, cpu, task = a["ev"], a["t"], a["cpu"], a["task"]
    on_slot = cpu >= 0
    down = on_slot & ((ev == el.PARK) | (ev == el.LEND))
    up = on_slot & ((ev == el.RESUME) | (ev == el.RECLAIM))
    delta = up.astype(np.int64) - down.astype(np.int64)
    initial = sum(ch == "O" for ch in log.initial)
    after = initial + np.cumsum(delta)
    before = after - delta
    bad = np.flatnonzero((after < 0) | (after > log.n_cpus))
    if len(bad):
        k = int(bad[0])
        out.append(f"occupied count {after[k]} out of range at t={t[k]}")
    is_pred = ev == el.PREDICTION
    preds = task[is_pred]
    bad = np.flatnonzero((preds < 1) | (preds > log.n_cpus))
    if len(bad):
        out.append(f"prediction {preds[bad[0]]} out of range")
    # latest prediction in force at every record (initially all cpus)
    last = np.maximum.accumulate(np.where(is_pred, np.arange(len(ev)), -1))
    target = np.where(last >= 0, task[np.maximum(last, 0)], log.n_cpus)
    checks = []
    if prediction:
        checks.append((on_slot & (ev == el.PARK) & ~(before > target), "park"))
        checks.append((on_slot & (ev == el.RESUME) & ~(before < target), "resume"))
    if sharing_gate:
        # only voluntary lends of own CPUs; handing a borrowed CPU back on
        # reclaim is not gated
        mine = on_slot.copy()
        if owned is not None:
            mine[on_slot] = owned[cpu[on_slot]]
        checks.append((mine & (ev == el.LEND) & (t < makespan) & ~(before > target),
                       "lend"))
    for mask, name in checks:
        bad = np.flatnonzero(mask)
        if len(bad):
            k = int(bad[0])
            out.append(f"{name} at t={t[k]:.3f} with occupied {before[k]} "
                       f"against target {target[k]}")


def _ema(log, graph, monitor, out: list, strict: bool) -> None:
    a = log.arrays()
    m = a["ev"] == el.END
    lam = monitor.ema_decay
    alpha: dict[int, float] = {}
    lo: dict[int, float] = {}
    hi: dict[int, float] = {}
    for tid in a["task"][m].tolist():
        task = graph.tasks[tid]
        if task.cost <= 0:
            continue
        r = (task.end - task.start) / task.cost
        j = task.task_type.id
        alpha[j] = r if j not in alpha else lam * r + (1.0 - lam) * alpha[j]
        lo[j] = min(lo.get(j, math.inf), r)
        hi[j] = max(hi.get(j, -math.inf), r)
    for j, st in enumerate(monitor.stats):
        if st is None or st.unitary_cost is None:
            if st is not None and j in alpha:
                out.append(f"type {st.label}: observed but no unitary cost")
            continue
        u = st.unitary_cost
        tol = 1e-9 * max(1.0, abs(hi[j]))
        if not lo[j] - tol <= u <= hi[j] + tol:
            out.append(f"type {st.label}: unitary cost {u} outside [{lo[j]}, {hi[j]}]")
        # the threaded backend finishes tasks concurrently, so the fold order
        # can differ from the log order there
        if strict and not math.isclose(u, alpha[j], rel_tol=1e-9):
            out.append(f"type {st.label}: unitary cost {u} != replayed {alpha[j]}")


def validate_run(result, arbiter: sh.Arbiter | None = None, *, strict: bool = True,
                 sharing_gate: bool = False) -> list[str]:
    """Check a finished run.  ``strict`` enables the checks that only hold
    for the deterministic backend (exact event order, one-sided corrections,
    replayed moving average)."""
    out: list[str] = []
    log, graph, monitor = result.log, result.graph, result.monitor
    _lifecycle(log, graph, out, strict)
    _fold_workloads(log, graph, monitor, out)
    prediction = strict and result.policy == "prediction"
    owned = None
    if arbiter is not None:
        owned = np.array(arbiter.owner) == log.runtime_id
    _slots(log, result.makespan_us, out, prediction, sharing_gate, owned)
    if monitor is not None:
        _ema(log, graph, monitor, out, strict)
    if arbiter is not None:
        try:
            arbiter.check_partition()
            sh.check_history(arbiter.history, arbiter.owner)
        except sh.ArbiterError as exc:
            out.append(str(exc))
    return out
