"""Tasks, task types, dependencies and the ready queue.

A :class:`TaskGraph` owns every task created in one runtime instance.  It
enforces the ``created -> ready -> executing -> finished`` life cycle and
releases dependents when their last dependency finishes.  Observers are
plain callables so both the virtual and the threaded engine can drive it.
"""
from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Optional

CREATED = 0
READY = 1
EXECUTING = 2
FINISHED = 3

STATUS_NAMES = ("created", "ready", "executing", "finished")


class TaskError(Exception):
    """Rejected task operation (bad arguments or an illegal transition)."""


@dataclass(frozen=True)
class TaskType:
    id: int
    label: str


class TaskDescriptor:
    __slots__ = (
        "id", "task_type", "cost", "parent", "dependencies", "status", "body",
        "pending", "dependents", "start", "end", "ledger", "counted",
    )

    def __init__(self, tid, task_type, cost, parent, dependencies, body):
        self.id = tid
        self.task_type = task_type
        self.cost = cost
        self.parent = parent
        self.dependencies = dependencies
        self.body = body
        self.status = CREATED
        self.pending = 0
        self.dependents = None
        self.start = None
        self.end = None
        # written by the monitor: predicted-time entry and whether the task's
        # share currently sits in its type's executing workload
        self.ledger = None
        self.counted = False

    def __repr__(self):
        return (f"TaskDescriptor(id={self.id}, type={self.task_type.label!r}, "
                f"cost={self.cost}, status={STATUS_NAMES[self.status]})")


class TaskRecord(NamedTuple):
    task: int
    start: float
    end: float

    @property
    def execution_time(self) -> float:
        return self.end - self.start


class ReadyQueue:
    """FIFO of ready tasks.  ``push``/``pop`` are safe from any thread."""

    def __init__(self):
        self._items = deque()
        self._lock = threading.Lock()

    def push(self, task: TaskDescriptor) -> None:
        with self._lock:
            self._items.append(task)

    def pop(self) -> Optional[TaskDescriptor]:
        """Remove the oldest task and mark it executing, or return None."""
        with self._lock:
            if not self._items:
                return None
            task = self._items.popleft()
            task.status = EXECUTING
            return task

    def __len__(self):
        return len(self._items)

    def __bool__(self):
        return bool(self._items)

    def ids(self) -> list[int]:
        with self._lock:
            return [t.id for t in self._items]


class TaskGraph:
    """Registry of the tasks of one runtime instance.

    ``on_create(task)`` runs after a task is registered.  ``on_ready(tasks)``
    receives every task that became ready in one step, before they are
    enqueued, so observers see a task ready before any thread can start it.
    ``on_added(tasks)`` runs once they are in the queue; that is where an
    engine issues the ADD action to its CPU manager.
    """

    def __init__(self, on_create: Callable | None = None,
                 on_ready: Callable | None = None,
                 on_added: Callable | None = None):
        self.tasks: list[TaskDescriptor] = []
        self.types: dict[str, TaskType] = {}
        self.queue = ReadyQueue()
        self.on_create = on_create
        self.on_ready = on_ready
        self.on_added = on_added
        self.finished_count = 0
        self._lock = threading.Lock()

    def task_type(self, label: str) -> TaskType:
        tt = self.types.get(label)
        if tt is None:
            with self._lock:
                tt = self.types.get(label)
                if tt is None:
                    tt = TaskType(len(self.types), label)
                    self.types[label] = tt
        return tt

    def create_task(self, task_type: TaskType, cost: float,
                    deps: Iterable[int] = (), parent: int | None = None,
                    body=None) -> int:
        if cost < 0:
            raise TaskError(f"negative cost {cost!r}")
        deps = tuple(deps)
        with self._lock:
            n = len(self.tasks)
            for d in deps:
                if not 0 <= d < n:
                    raise TaskError(f"unknown dependency id {d}")
            if parent is not None and not 0 <= parent < n:
                raise TaskError(f"unknown parent id {parent}")
            task = TaskDescriptor(n, task_type, cost, parent, deps, body)
            pending = 0
            for d in deps:
                dep = self.tasks[d]
                if dep.status != FINISHED:
                    pending += 1
                    if dep.dependents is None:
                        dep.dependents = [task]
                    else:
                        dep.dependents.append(task)
            task.pending = pending
            self.tasks.append(task)
            if pending == 0:
                task.status = READY
        if self.on_create is not None:
            self.on_create(task)
        if pending == 0:
            self._enqueue((task,))
        return n

    def _enqueue(self, tasks) -> None:
        if self.on_ready is not None:
            self.on_ready(tasks)
        for t in tasks:
            self.queue.push(t)
        if self.on_added is not None:
            self.on_added(tasks)

    def start_task(self, task: TaskDescriptor, now: float) -> None:
        # The ready queue already flipped the status under its lock.
        if task.status != EXECUTING or task.start is not None:
            raise TaskError(f"task {task.id} cannot start from status "
                            f"{STATUS_NAMES[task.status]}")
        task.start = now

    def complete_task(self, tid: int, now: float) -> TaskRecord:
        released = []
        with self._lock:
            task = self.tasks[tid]
            if task.status != EXECUTING:
                raise TaskError(f"task {tid} completed from status "
                                f"{STATUS_NAMES[task.status]}")
            task.status = FINISHED
            task.end = now
            self.finished_count += 1
            if task.dependents is not None:
                for dep in task.dependents:
                    dep.pending -= 1
                    if dep.pending == 0:
                        dep.status = READY
                        released.append(dep)
                task.dependents = None
        record = TaskRecord(tid, task.start, now)
        if released:
            self._enqueue(released)
        return record

    def __len__(self):
        return len(self.tasks)

    def all_finished(self) -> bool:
        return self.finished_count == len(self.tasks)
