"""Deterministic discrete-event backend.

Task bodies advance a virtual clock (microseconds) by their declared
duration.  Worker thread ``i`` is bound to CPU slot ``i``.  A thread that
finds the ready queue empty asks the CPU manager what to do; spinning
threads are not simulated poll by poll, they sit in a FIFO and grab the
next task the moment one is enqueued.

Costs that make policies differ:

* waking a parked thread takes ``resume_latency_us`` during which the slot
  is occupied (billed as spinning) but cannot run tasks,
* one poll of an empty queue takes ``poll_cost_us``; hybrid policies spin
  ``spin_budget`` polls before parking or lending,
* every arbiter entry point charges ``Arbiter.latency_us`` to its caller.

Two instances can share one :class:`Simulation` and one
:class:`~predrt.sharing.Arbiter`; in that mode a thread that gives up its
CPU lends it instead of parking.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable

from . import cpu_manager as cm
from . import eventlog as el
from . import sharing as sh
from .monitoring import Monitor
from .predictor import Predictor, PredictorConfig
from .tasks import TaskGraph
from .workload import Workload, creation_order

EXEC, SPIN, WAKE, PARKED, LENT = range(5)


@dataclass(frozen=True)
class EngineCosts:
    resume_latency_us: float = 5.0
    poll_cost_us: float = 0.1


class Simulation:
    """Event loop with a virtual clock; ties break by scheduling order."""

    __slots__ = ("now", "_heap", "_seq")

    def __init__(self):
        self.now = 0.0
        self._heap: list = []
        self._seq = 0

    def schedule(self, t: float, fn: Callable, arg=None) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (t, self._seq, fn, arg))

    def run(self) -> None:
        heap = self._heap
        pop = heapq.heappop
        while heap:
            t, _, fn, arg = pop(heap)
            self.now = t
            fn(arg)


@dataclass
class RunResult:
    makespan_us: float
    log: el.EventLog
    monitor: Monitor | None
    manager: cm.CpuManager
    graph: TaskGraph
    policy: str
    workload: Workload
    predictions: int = 0

    @property
    def transitions(self) -> int:
        return self.manager.parks + self.manager.resumes


class VirtualRuntime:
    def __init__(self, sim: Simulation, workload: Workload, policy: cm.Policy, *,
                 n_cpus: int, period_us: float = 50.0, ema_decay: float = 0.5,
                 min_cpus: int = 1, monitoring: bool = True,
                 costs: EngineCosts = EngineCosts(), single_resume: bool = False,
                 runtime_id: int = 0, arbiter: sh.Arbiter | None = None,
                 sharing: sh.SharingPolicy | None = None,
                 on_done: Callable | None = None):
        workload.validate()
        if policy.kind == cm.PREDICTION and not monitoring:
            raise ValueError("the prediction policy needs monitoring")
        if sharing is not None and arbiter is None:
            raise ValueError("a sharing policy needs an arbiter")
        self.sim = sim
        self.wl = workload
        self.policy = policy
        self.costs = costs
        self.rid = runtime_id
        self.arbiter = arbiter
        self.sharing = sharing
        self.on_done = on_done
        if arbiter is not None:
            n_cpus = arbiter.n_cpus
            held = arbiter.owned_by(runtime_id)
        else:
            held = range(n_cpus)
        self.n_cpus = n_cpus
        self.mgr = cm.CpuManager(n_cpus, policy, held=held, single_resume=single_resume)
        self.monitor = Monitor(ema_decay) if monitoring else None
        self.graph = TaskGraph(on_create=self._on_create, on_ready=self._on_ready,
                               on_added=self._on_added)
        if self.monitor is not None:
            self.monitor.attach(self.graph.tasks)
        self.queue = self.graph.queue
        self.labels = list(workload.type_labels)
        self.types = [self.graph.task_type(label) for label in self.labels]
        initial = "".join("O" if self.mgr.occupied[c] else "L" for c in range(n_cpus))
        label = str(policy) if sharing is None else f"share-{sharing}"
        self.log = el.EventLog(n_cpus, self.labels, runtime_id, label, initial)
        self.predictor = None
        if monitoring:
            self.predictor = Predictor(self.monitor, n_cpus,
                                       PredictorConfig(period_us, min_cpus),
                                       publish=self._publish)

        self.state = [EXEC if occ else LENT for occ in self.mgr.occupied]
        self.spinning: dict[int, None] = {}
        self.running = [None] * n_cpus
        self.spin_gen = [0] * n_cpus
        self.vacate = [False] * n_cpus
        self.waking = 0
        self.finishing = 0  # a thread about to poll after completing a task
        self.caller_delay = 0.0
        self.done = False
        self.makespan = None

        order = creation_order(workload)
        self.order = list(range(workload.n_tasks)) if order is None else order.tolist()
        self.ids = [-1] * workload.n_tasks  # workload index -> task id
        self._tt = workload.task_type.tolist()
        self._cost = workload.cost.tolist()
        self._dur = workload.duration.tolist()
        self._par = None if workload.parent is None else workload.parent.tolist()
        self._stage_ptr = workload.stage_ptr.tolist()
        self.stage = -1
        self.next_pos = 0
        self.stage_end = 0
        self.stage_left = 0
        self.creating = False

        if arbiter is not None:
            arbiter.on_reclaim[runtime_id] = self._reclaimed
            arbiter.on_returned[runtime_id] = self._returned

    # start-up ---------------------------------------------------------------

    def start(self) -> None:
        now = self.sim.now
        for c in range(self.n_cpus):
            if self.state[c] != LENT:
                self.sim.schedule(now, self._poll, c)
        self._next_stage()
        if self.predictor is not None:
            self.sim.schedule(now + self.predictor.config.period_us, self._tick)

    def _next_stage(self) -> None:
        sp = self._stage_ptr
        while True:
            self.stage += 1
            if self.stage >= len(sp) - 1:
                self._finish_run()
                return
            start, end = sp[self.stage], sp[self.stage + 1]
            if end > start:
                break
        self.next_pos = start
        self.stage_end = end
        self.stage_left = end - start
        self.creating = True
        self.sim.schedule(self.sim.now, self._create)

    # task creation --------------------------------------------------------------

    def _create(self, _=None) -> None:
        i = self.order[self.next_pos]
        self.next_pos += 1
        ids = self.ids
        wl = self.wl
        a, b = wl.dep_ptr[i], wl.dep_ptr[i + 1]
        deps = [ids[d] for d in wl.dep_idx[a:b].tolist()] if b > a else ()
        parent = None
        if self._par is not None and self._par[i] >= 0:
            parent = ids[self._par[i]]
        self.caller_delay = 0.0
        ids[i] = self.graph.create_task(self.types[self._tt[i]], self._cost[i], deps,
                                        parent, self._dur[i])
        if self.next_pos < self.stage_end:
            self.sim.schedule(self.sim.now + self.wl.create_cost_us + self.caller_delay,
                              self._create)
        else:
            self.creating = False
        self.caller_delay = 0.0

    def _on_create(self, task) -> None:
        if self.monitor is not None:
            self.monitor.on_create(task)
        self.log.add(self.sim.now, el.CREATE, -1, -1, task.id, task.task_type.id)

    def _on_ready(self, tasks) -> None:
        now = self.sim.now
        mon = self.monitor
        add = self.log.add
        for t in tasks:
            if mon is not None:
                mon.on_ready(t)
            add(now, el.READY, -1, -1, t.id, t.task_type.id)

    def _on_added(self, tasks) -> None:
        if self.sharing is None:
            if self.mgr.parked:
                for c in self.mgr.add(len(tasks)):
                    self._wake_up(c, el.RESUME)
        elif self.sharing.kind != sh.PREDICTION and not self.done:
            excess = (len(self.queue) - len(self.spinning) - self.waking
                      - self.finishing)
            if excess > 0:
                self.caller_delay += self._acquire(excess)
        self._dispatch()

    def _dispatch(self) -> None:
        spinning = self.spinning
        queue = self.queue
        while spinning and queue:
            c = next(iter(spinning))
            del spinning[c]
            self._execute(c, queue.pop())

    # worker behaviour -----------------------------------------------------------

    def _poll(self, c: int) -> None:
        if self.state[c] == LENT or (self.done and self.sharing is None):
            return
        if self.vacate[c]:
            self._give_back(c)
            return
        task = self.queue.pop()
        if task is not None:
            self._execute(c, task)
            return
        sharing = self.sharing
        if sharing is None:
            if self.mgr.poll(c) is cm.PARK:
                self.state[c] = PARKED
                self.log.add(self.sim.now, el.PARK, c, c)
            else:
                self._spin(c, self.policy.kind == cm.HYBRID, self.policy.spin_budget)
        elif sharing.kind == sh.LEWI or self.done:
            self._lend(c)
        elif sharing.kind == sh.HYBRID:
            self._spin(c, True, sharing.spin_budget)
        elif self.mgr.active > self.mgr.target:
            self._lend(c)
        else:
            self._spin(c, False, 0)

    def _spin(self, c: int, timed: bool, budget: int) -> None:
        self.state[c] = SPIN
        self.spinning[c] = None
        if timed:
            self.spin_gen[c] += 1
            self.sim.schedule(self.sim.now + budget * self.costs.poll_cost_us,
                              self._spin_expired, (c, self.spin_gen[c]))

    def _spin_expired(self, arg) -> None:
        c, gen = arg
        if self.state[c] != SPIN or self.spin_gen[c] != gen or self.done:
            return
        del self.spinning[c]
        if self.sharing is not None:
            self._lend(c)
            return
        # the whole budget of empty polls elapsed
        self.mgr.poll(c, self.policy.spin_budget)
        self.state[c] = PARKED
        self.log.add(self.sim.now, el.PARK, c, c)

    def _execute(self, c: int, task) -> None:
        now = self.sim.now
        self.state[c] = EXEC
        self.running[c] = task
        self.mgr.task_dequeued(c)
        self.graph.start_task(task, now)
        if self.monitor is not None:
            self.monitor.on_start(task)
        self.log.add(now, el.START, c, c, task.id, task.task_type.id)
        self.sim.schedule(now + task.body, self._finish, c)

    def _finish(self, c: int) -> None:
        now = self.sim.now
        task = self.running[c]
        self.running[c] = None
        self.log.add(now, el.END, c, c, task.id, task.task_type.id)
        self.caller_delay = 0.0
        # mark the thread as not executing before dependents get dispatched
        self.state[c] = SPIN
        self.finishing = 1
        self.graph.complete_task(task.id, now)
        self.finishing = 0
        if self.monitor is not None:
            self.monitor.on_finish(task, now - task.start)
        delay = self.caller_delay
        self.caller_delay = 0.0
        self.stage_left -= 1
        if self.stage_left == 0 and not self.creating:
            self._next_stage()
        if delay > 0:
            self.sim.schedule(now + delay, self._poll, c)
        else:
            self._poll(c)

    def _wake_up(self, c: int, event: int) -> None:
        self.state[c] = WAKE
        self.waking += 1
        self.log.add(self.sim.now, event, c, c)
        self.sim.schedule(self.sim.now + self.costs.resume_latency_us, self._woken, c)

    def _woken(self, c: int) -> None:
        if self.state[c] != WAKE:
            return
        self.waking -= 1
        self._poll(c)

    # prediction ticks -------------------------------------------------------------

    def _publish(self, pred) -> None:
        self.mgr.set_target(pred.target_cpus)
        self.log.add_prediction(self.sim.now, pred.target_cpus, pred.contributions)

    def _tick(self, _=None) -> None:
        if self.done:
            return
        self.predictor.tick(self.sim.now)
        mgr = self.mgr
        sharing = self.sharing
        if sharing is None and self.policy.kind == cm.PREDICTION:
            # spinning threads re-poll with the new target
            for c in list(self.spinning):
                if mgr.active <= mgr.target:
                    break
                del self.spinning[c]
                mgr.poll(c)
                self.state[c] = PARKED
                self.log.add(self.sim.now, el.PARK, c, c)
            if self.queue and mgr.parked:
                for c in mgr.add(len(self.queue)):
                    self._wake_up(c, el.RESUME)
        elif sharing is not None and sharing.kind == sh.PREDICTION:
            for c in list(self.spinning):
                if mgr.active <= mgr.target:
                    break
                del self.spinning[c]
                self._lend(c)
            if mgr.target > mgr.active:
                self._acquire(mgr.target - mgr.active)
        self.sim.schedule(self.sim.now + self.predictor.config.period_us, self._tick)

    # CPU sharing ------------------------------------------------------------------

    def _lend(self, c: int) -> None:
        if self.arbiter.reclaim_pending[c]:
            self._give_back(c)
            return
        self.spinning.pop(c, None)
        self.state[c] = LENT
        self.mgr.release(c)
        self.arbiter.lend_cpu(self.rid, c, count=not self.done)
        self.log.add(self.sim.now, el.LEND, c, c)

    def _give_back(self, c: int) -> None:
        self.vacate[c] = False
        self.spinning.pop(c, None)
        self.state[c] = LENT
        self.mgr.release(c)
        self.log.add(self.sim.now, el.LEND, c, c)
        self.arbiter.vacate(self.rid, c)

    def _acquire(self, need: int) -> float:
        """Get up to ``need`` CPUs from the arbiter; returns the time spent."""
        arb = self.arbiter
        calls = 1
        got = arb.acquire_cpus(self.rid, need)
        for c in got:
            self.mgr.occupy(c)
            self._wake_up(c, el.RECLAIM)
        short = need - len(got)
        if short > 0:
            for c in range(self.n_cpus):
                if short == 0:
                    break
                if arb.owner[c] == self.rid and arb.reclaim(self.rid, c):
                    calls += 1
                    short -= 1
        return calls * arb.latency_us

    def _reclaimed(self, c: int) -> None:
        # the owner wants ``c`` back; leave at the next poll boundary
        if self.state[c] == SPIN:
            self._give_back(c)
        else:
            self.vacate[c] = True

    def _returned(self, c: int) -> None:
        if self.done:
            self.arbiter.lend_cpu(self.rid, c, count=False)
            return
        self.mgr.occupy(c)
        self._wake_up(c, el.RECLAIM)

    # completion -------------------------------------------------------------------

    def _finish_run(self) -> None:
        self.done = True
        self.makespan = self.sim.now
        if self.arbiter is not None:
            for c in range(self.n_cpus):
                st = self.state[c]
                if st == LENT:
                    continue
                if st == WAKE:
                    self.waking -= 1
                self.spinning.pop(c, None)
                if self.arbiter.state[c] == sh.BORROWED:
                    self._give_back(c)
                else:
                    self._lend(c)
        if self.on_done is not None:
            self.on_done(self)

    def result(self) -> RunResult:
        if not self.done:
            raise RuntimeError("run has not finished")
        return RunResult(self.makespan, self.log, self.monitor, self.mgr, self.graph,
                         self.log.policy, self.wl,
                         self.predictor.ticks if self.predictor else 0)


def run_virtual(workload: Workload, policy: cm.Policy | str, *, n_cpus: int,
                period_us: float = 50.0, ema_decay: float = 0.5, min_cpus: int = 1,
                monitoring: bool = True, costs: EngineCosts = EngineCosts(),
                single_resume: bool = False) -> RunResult:
    """Run one workload to completion on the virtual clock."""
    if isinstance(policy, str):
        policy = cm.Policy.parse(policy)
    sim = Simulation()
    rt = VirtualRuntime(sim, workload, policy, n_cpus=n_cpus, period_us=period_us,
                        ema_decay=ema_decay, min_cpus=min_cpus, monitoring=monitoring,
                        costs=costs, single_resume=single_resume)
    rt.start()
    sim.run()
    return rt.result()


@dataclass
class SharedRunResult:
    results: tuple
    arbiter: sh.Arbiter


def run_shared_virtual(workloads: tuple, sharing: sh.SharingPolicy | str, *,
                       cpus_each: int, period_us: float = 50.0,
                       ema_decay: float = 0.5, costs: EngineCosts = EngineCosts(),
                       arbiter_latency_us: float = 1.0) -> SharedRunResult:
    """Run two workloads concurrently, each owning ``cpus_each`` CPUs of a
    shared set and lending/acquiring through one arbiter."""
    if isinstance(sharing, str):
        sharing = sh.SharingPolicy.parse(sharing)
    if len(workloads) != 2:
        raise ValueError("exactly two runtimes share the CPU set")
    sim = Simulation()
    owners = [0] * cpus_each + [1] * cpus_each
    arbiter = sh.Arbiter(owners, arbiter_latency_us, clock=lambda: sim.now)
    # both runtimes predict for the whole shared set
    base = cm.Policy(cm.PREDICTION) if sharing.kind == sh.PREDICTION else cm.Policy(cm.IDLE)
    rts = [VirtualRuntime(sim, wl, base, n_cpus=2 * cpus_each, period_us=period_us,
                          ema_decay=ema_decay, costs=costs, runtime_id=i,
                          arbiter=arbiter, sharing=sharing)
           for i, wl in enumerate(workloads)]
    for rt in rts:
        rt.start()
    sim.run()
    return SharedRunResult(tuple(rt.result() for rt in rts), arbiter)
