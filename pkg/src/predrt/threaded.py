"""Real-thread backend.

One OS thread per CPU slot; task bodies busy-wait for their declared
duration on the wall clock.  Parking uses one :class:`threading.Event` per
thread, so a resume signal sent before the thread actually waits is not
lost.  The calling thread acts as the task creator and joins each stage.

Timestamps are microseconds since the run started.
"""
from __future__ import annotations

import threading
import time

from . import cpu_manager as cm
from . import eventlog as el
from .engine import RunResult
from .monitoring import Monitor
from .predictor import Predictor, PredictorConfig
from .tasks import TaskGraph
from .workload import Workload, creation_order

_perf = time.perf_counter


class ThreadedRuntime:
    def __init__(self, workload: Workload, policy: cm.Policy, *, n_cpus: int,
                 period_us: float = 50.0, ema_decay: float = 0.5, min_cpus: int = 1,
                 monitoring: bool = True, trace: bool = True,
                 single_resume: bool = False):
        workload.validate()
        if policy.kind == cm.PREDICTION and not monitoring:
            raise ValueError("the prediction policy needs monitoring")
        self.wl = workload
        self.policy = policy
        self.n_cpus = n_cpus
        self.trace = trace
        self.mgr = cm.CpuManager(n_cpus, policy, single_resume=single_resume)
        self.monitor = Monitor(ema_decay) if monitoring else None
        self.graph = TaskGraph(on_create=self._on_create, on_ready=self._on_ready,
                               on_added=self._on_added)
        if self.monitor is not None:
            self.monitor.attach(self.graph.tasks)
        self.queue = self.graph.queue
        self.labels = list(workload.type_labels)
        self.types = [self.graph.task_type(label) for label in self.labels]
        self.predictor = None
        if monitoring:
            self.predictor = Predictor(self.monitor, n_cpus,
                                       PredictorConfig(period_us, min_cpus),
                                       publish=self._publish)
        self.events = [threading.Event() for _ in range(n_cpus)]
        self.rows = [[] for _ in range(n_cpus + 2)]  # workers, creator, ticker
        self.done = False
        self.t0 = 0.0
        self.last_end = 0.0
        self.stage_left = 0
        self.stage_done = threading.Event()
        self._count_lock = threading.Lock()

    def now(self) -> float:
        return (_perf() - self.t0) * 1e6

    # hooks -------------------------------------------------------------------

    def _on_create(self, task) -> None:
        if self.monitor is not None:
            self.monitor.on_create(task)
        if self.trace:
            self.rows[self.n_cpus].append((self.now(), el.CREATE, -1, -1, task.id,
                                           task.task_type.id))

    def _on_ready(self, tasks) -> None:
        mon = self.monitor
        if mon is not None:
            for t in tasks:
                mon.on_ready(t)
        if self.trace:
            now = self.now()
            # logged by whichever thread released them; merged by time later
            rows = self.rows[self.n_cpus + 1]
            for t in tasks:
                rows.append((now, el.READY, -1, -1, t.id, t.task_type.id))

    def _on_added(self, tasks) -> None:
        if self.mgr.parked:
            self._resume(self.mgr.add(len(tasks)))

    def _resume(self, threads) -> None:
        for c in threads:
            if self.trace:
                self.rows[self.n_cpus + 1].append((self.now(), el.RESUME, c, c, -1, -1))
            self.events[c].set()

    def _publish(self, pred) -> None:
        self.mgr.set_target(pred.target_cpus)
        if self.trace:
            detail = ";".join(f"{label}={beta:.6g}" for label, beta in pred.contributions)
            self.rows[self.n_cpus + 1].append((pred.timestamp, el.PREDICTION, -1, -1,
                                               pred.target_cpus, -1, detail))
        if self.queue and self.mgr.parked:
            self._resume(self.mgr.add(len(self.queue)))

    # worker ------------------------------------------------------------------

    def _worker(self, c: int) -> None:
        queue = self.queue
        graph = self.graph
        mon = self.monitor
        mgr = self.mgr
        ev = self.events[c]
        rows = self.rows[c]
        trace = self.trace
        t0 = self.t0
        busy = self.policy.kind == cm.BUSY
        while not self.done:
            task = queue.pop()
            if task is None:
                if busy:
                    time.sleep(0)
                    continue
                if mgr.poll(c) is not cm.PARK:
                    time.sleep(0)
                    continue
                if trace:
                    rows.append(((_perf() - t0) * 1e6, el.PARK, c, c, -1, -1))
                # a task enqueued between the empty pop and the park saw no
                # parked thread; re-issue the ADD so it is not stranded
                if queue:
                    self._resume(mgr.add(len(queue)))
                ev.wait()
                ev.clear()
                continue
            mgr.task_dequeued(c)
            start = _perf()
            task.start = (start - t0) * 1e6
            if mon is not None:
                mon.on_start(task)
            deadline = start + task.body * 1e-6
            while _perf() < deadline:
                pass
            end = _perf()
            end_us = (end - t0) * 1e6
            if trace:
                tt = task.task_type.id
                rows.append((task.start, el.START, c, c, task.id, tt))
                rows.append((end_us, el.END, c, c, task.id, tt))
            graph.complete_task(task.id, end_us)
            if mon is not None:
                mon.on_finish(task, end_us - task.start)
            with self._count_lock:
                if end_us > self.last_end:
                    self.last_end = end_us
                self.stage_left -= 1
                if self.stage_left == 0:
                    self.stage_done.set()

    # driver ------------------------------------------------------------------

    def run(self) -> RunResult:
        wl = self.wl
        order = creation_order(wl)
        order = range(wl.n_tasks) if order is None else order.tolist()
        ids = [-1] * wl.n_tasks
        tt = wl.task_type.tolist()
        cost = wl.cost.tolist()
        dur = wl.duration.tolist()
        par = None if wl.parent is None else wl.parent.tolist()
        dep_ptr = wl.dep_ptr.tolist()
        dep_idx = wl.dep_idx.tolist()
        stage_ptr = wl.stage_ptr.tolist()
        types = self.types
        create = self.graph.create_task

        threads = [threading.Thread(target=self._worker, args=(c,), daemon=True,
                                    name=f"worker-{c}") for c in range(self.n_cpus)]
        self.t0 = _perf()
        for th in threads:
            th.start()
        if self.predictor is not None:
            self.predictor.start(self.now)
        try:
            for s in range(len(stage_ptr) - 1):
                a, b = stage_ptr[s], stage_ptr[s + 1]
                if a == b:
                    continue
                self.stage_done.clear()
                with self._count_lock:
                    self.stage_left += b - a
                for pos in range(a, b):
                    i = order[pos]
                    da, db = dep_ptr[i], dep_ptr[i + 1]
                    deps = [ids[d] for d in dep_idx[da:db]] if db > da else ()
                    parent = ids[par[i]] if par is not None and par[i] >= 0 else None
                    ids[i] = create(types[tt[i]], cost[i], deps, parent, dur[i])
                self.stage_done.wait()
        finally:
            self.done = True
            if self.predictor is not None:
                self.predictor.stop()
            for e in self.events:
                e.set()
            for th in threads:
                th.join()

        log = el.EventLog(self.n_cpus, self.labels, 0, str(self.policy))
        if self.trace:
            rows = [r for rs in self.rows for r in rs]
            # the run ends at the last task end; drop shutdown noise after it
            log.extend_sorted(r for r in rows if r[0] <= self.last_end)
        return RunResult(self.last_end, log, self.monitor, self.mgr, self.graph,
                         str(self.policy), wl,
                         self.predictor.ticks if self.predictor else 0)


def run_threaded(workload: Workload, policy: cm.Policy | str, *, n_cpus: int,
                 period_us: float = 50.0, ema_decay: float = 0.5, min_cpus: int = 1,
                 monitoring: bool = True, trace: bool = True) -> RunResult:
    """Run one workload on real threads; returns when every task finished."""
    if isinstance(policy, str):
        policy = cm.Policy.parse(policy)
    rt = ThreadedRuntime(workload, policy, n_cpus=n_cpus, period_us=period_us,
                         ema_decay=ema_decay, min_cpus=min_cpus, monitoring=monitoring,
                         trace=trace)
    return rt.run()
