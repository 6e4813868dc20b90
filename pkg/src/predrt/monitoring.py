"""Per-task-type timing statistics feeding the CPU predictor.

For every task type the monitor keeps

* ``unitary_cost``: exponential moving average of ``execution_time / cost``
  (microseconds per cost unit),
* ``ready`` / ``executing``: accumulated cost of live tasks in each status,
* ``instances``: number of live (ready or executing) tasks.

Each task type has its own lock, so :meth:`Monitor.snapshot` always sees the
four fields of a type together.
"""
from __future__ import annotations

import csv
import io
import threading
from typing import NamedTuple, Optional


def accuracy(predicted: float, actual: float) -> float:
    """Symmetric prediction accuracy in percent, bounded to [0, 100]."""
    hi = max(predicted, actual)
    if hi <= 0:
        return 100.0
    return 100.0 * (1.0 - abs(predicted - actual) / hi)


class TypeSnapshot(NamedTuple):
    label: str
    ready: float
    executing: float
    unitary_cost: Optional[float]
    instances: int


class TypeStats:
    __slots__ = ("label", "unitary_cost", "ready", "executing", "instances",
                 "observations", "acc_sum", "acc_count", "lock")

    def __init__(self, label):
        self.label = label
        self.unitary_cost = None
        self.ready = 0.0
        self.executing = 0.0
        self.instances = 0
        self.observations = 0
        self.acc_sum = 0.0
        self.acc_count = 0
        self.lock = threading.Lock()

    def snapshot(self) -> TypeSnapshot:
        with self.lock:
            return TypeSnapshot(self.label, self.ready, self.executing,
                                self.unitary_cost, self.instances)


# Per-task predicted-time entries live on the task descriptor as tuples of
# scalars (no side table for the cyclic GC to walk).  Fields:
_PRED, _REMAINING, _UNIT, _CONTRIB = range(4)


class AccuracyRow(NamedTuple):
    task_type: str
    instances: int
    avg_accuracy_pct: Optional[float]


class AccuracyReport(NamedTuple):
    rows: list
    overall: AccuracyRow

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["task_type", "instances", "avg_accuracy_pct"])
        for row in [*self.rows, self.overall]:
            acc = "NA" if row.avg_accuracy_pct is None else f"{row.avg_accuracy_pct:.4f}"
            w.writerow([row.task_type, row.instances, acc])
        return buf.getvalue()


class Monitor:
    """Workload and unitary-cost tracker.

    Hooks take the task descriptor from :mod:`predrt.tasks`; they are safe to
    call from several worker threads at once.

    A task created after its type has at least one observation gets a
    predicted time ``cost * unitary_cost``.  When a child finishes, its
    execution time is taken off the parent's remaining predicted time, and a
    running parent's share of the executing workload shrinks to match.
    """

    def __init__(self, ema_decay: float = 0.5):
        if not 0.0 < ema_decay <= 1.0:
            raise ValueError("ema_decay must lie in (0, 1]")
        self.ema_decay = ema_decay
        self.stats: list[TypeStats] = []
        self._types_lock = threading.Lock()
        self._tasks = None

    def attach(self, tasks) -> None:
        """Give id -> descriptor access, needed to charge parents."""
        self._tasks = tasks

    def stats_for(self, task_type) -> TypeStats:
        tid = task_type.id
        stats = self.stats
        if tid < len(stats) and stats[tid] is not None:
            return stats[tid]
        with self._types_lock:
            while len(stats) <= tid:
                stats.append(None)
            if stats[tid] is None:
                stats[tid] = TypeStats(task_type.label)
            return stats[tid]

    def on_create(self, task) -> None:
        try:
            st = self.stats[task.task_type.id]
        except IndexError:
            st = None
        if st is None:
            st = self.stats_for(task.task_type)
        alpha = st.unitary_cost
        if alpha is not None:
            p = task.cost * alpha
            task.ledger = (p, p, alpha, task.cost)

    def on_ready(self, task) -> None:
        st = self.stats[task.task_type.id]
        with st.lock:
            st.ready += task.cost
            st.instances += 1

    def on_start(self, task) -> None:
        st = self.stats[task.task_type.id]
        cost = task.cost
        with st.lock:
            entry = task.ledger
            r = st.ready - cost
            st.ready = r if r > 0.0 else 0.0
            st.executing += cost if entry is None else entry[_CONTRIB]
            task.counted = True

    def on_finish(self, task, execution_time: float) -> None:
        st = self.stats[task.task_type.id]
        cost = task.cost
        with st.lock:
            entry = task.ledger
            task.counted = False
            e = st.executing - (cost if entry is None else entry[_CONTRIB])
            st.executing = e if e > 0.0 else 0.0
            st.instances -= 1
            if st.instances == 0:
                # drop float residue once nothing of this type is live
                st.ready = 0.0
                st.executing = 0.0
            if cost > 0:
                ratio = execution_time / cost
                alpha = st.unitary_cost
                if alpha is None:
                    st.unitary_cost = ratio
                else:
                    lam = self.ema_decay
                    st.unitary_cost = lam * ratio + (1.0 - lam) * alpha
                st.observations += 1
            if entry is not None:
                p = entry[_PRED]
                hi = p if p > execution_time else execution_time
                st.acc_sum += 100.0 if hi <= 0 else 100.0 * (1.0 - abs(p - execution_time) / hi)
                st.acc_count += 1
        if task.parent is not None and self._tasks is not None:
            self._charge_parent(self._tasks[task.parent], execution_time)

    def _charge_parent(self, parent, execution_time: float) -> None:
        if parent.ledger is None:
            return
        st = self.stats[parent.task_type.id]
        with st.lock:
            pred, rem, unit, old = parent.ledger
            rem = max(0.0, rem - execution_time)
            contrib = min(old, rem / unit) if unit > 0 else old
            parent.ledger = (pred, rem, unit, contrib)
            if parent.counted:
                st.executing = max(0.0, st.executing - (old - contrib))

    def _entry(self, task_id: int):
        if self._tasks is None:
            raise RuntimeError("monitor is not attached to a task table")
        return self._tasks[task_id].ledger

    def remaining_time(self, task_id: int) -> Optional[float]:
        entry = self._entry(task_id)
        return None if entry is None else entry[_REMAINING]

    def predicted_time(self, task_id: int) -> Optional[float]:
        entry = self._entry(task_id)
        return None if entry is None else entry[_PRED]

    def snapshot(self) -> list[TypeSnapshot]:
        return [st.snapshot() for st in self.stats if st is not None]

    def quiescent(self) -> bool:
        return all(s.ready == 0 and s.executing == 0 and s.instances == 0
                   for s in self.snapshot())

    def accuracy_report(self) -> AccuracyReport:
        rows = []
        total_sum = 0.0
        total_n = 0
        for st in self.stats:
            if st is None:
                continue
            with st.lock:
                n, s = st.acc_count, st.acc_sum
            rows.append(AccuracyRow(st.label, n, s / n if n else None))
            total_sum += s
            total_n += n
        overall = AccuracyRow("ALL", total_n, total_sum / total_n if total_n else None)
        return AccuracyReport(rows, overall)
