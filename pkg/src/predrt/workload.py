"""Closed task DAGs handed to the engines.

A workload is a list of tasks in creation order, split into stages.  The
creator makes the tasks of one stage, one every ``create_cost_us``, and
starts the next stage only once every task of the current stage finished
(a join-all barrier).  Dependencies are stored in CSR form.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class CycleError(ValueError):
    pass


@dataclass
class Workload:
    name: str
    type_labels: list
    task_type: np.ndarray
    cost: np.ndarray
    duration: np.ndarray
    dep_ptr: np.ndarray
    dep_idx: np.ndarray
    stage_ptr: np.ndarray
    parent: np.ndarray | None = None
    create_cost_us: float = 0.5
    meta: dict = field(default_factory=dict)

    @property
    def n_tasks(self) -> int:
        return len(self.cost)

    @property
    def n_stages(self) -> int:
        return len(self.stage_ptr) - 1

    def deps(self, i: int) -> np.ndarray:
        return self.dep_idx[self.dep_ptr[i]:self.dep_ptr[i + 1]]

    def stage_of(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_stages), np.diff(self.stage_ptr))

    def validate(self) -> None:
        n = self.n_tasks
        for name in ("task_type", "duration"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has the wrong length")
        if len(self.dep_ptr) != n + 1 or self.dep_ptr[0] != 0 or self.dep_ptr[-1] != len(self.dep_idx):
            raise ValueError("malformed dependency pointers")
        if self.stage_ptr[0] != 0 or self.stage_ptr[-1] != n or np.any(np.diff(self.stage_ptr) < 0):
            raise ValueError("malformed stage pointers")
        if np.any(self.cost < 0):
            raise ValueError("negative task cost")
        if np.any(self.duration < 0):
            raise ValueError("negative task duration")
        if len(self.dep_idx) and (self.dep_idx.min() < 0 or self.dep_idx.max() >= n):
            raise ValueError("dependency on an unknown task")
        if self.parent is not None and len(self.parent) != n:
            raise ValueError("parent has the wrong length")
        owner = np.repeat(np.arange(n), np.diff(self.dep_ptr))
        stage = self.stage_of()
        if np.any(stage[self.dep_idx] > stage[owner]):
            raise ValueError("dependency on a task of a later stage")
        creation_order(self)  # raises CycleError

    def copy_with(self, **changes) -> "Workload":
        from dataclasses import replace
        return replace(self, **changes)


def creation_order(wl: Workload) -> np.ndarray | None:
    """Topological creation order, or None when index order already is one."""
    n = wl.n_tasks
    owner = np.repeat(np.arange(n), np.diff(wl.dep_ptr))
    if not len(wl.dep_idx) or np.all(wl.dep_idx < owner):
        return None
    # Kahn's algorithm per stage, smallest index first for determinism
    import heapq
    indeg = np.zeros(n, dtype=np.int64)
    np.add.at(indeg, owner, 1)
    succ: dict[int, list] = {}
    for d, o in zip(wl.dep_idx.tolist(), owner.tolist()):
        succ.setdefault(d, []).append(o)
    indeg = indeg.tolist()
    order = []
    heap = [i for i in range(n) if indeg[i] == 0]
    heapq.heapify(heap)
    while heap:
        i = heapq.heappop(heap)
        order.append(i)
        for o in succ.get(i, ()):
            indeg[o] -= 1
            if indeg[o] == 0:
                heapq.heappush(heap, o)
    if len(order) != n:
        raise CycleError("dependency graph has a cycle")
    order = np.asarray(order)
    # keep stages contiguous; a stable sort by stage preserves topology
    stage = wl.stage_of()
    return order[np.argsort(stage[order], kind="stable")]


def from_lists(name, tasks, stages=None, create_cost_us=0.5) -> Workload:
    """Build a workload from ``(type_label, cost, duration, deps[, parent])`` tuples.

    ``stages`` is a list of stage sizes; default is one stage.
    """
    labels: list = []
    lid: dict = {}
    tt, cost, dur, ptr, idx, par = [], [], [], [0], [], []
    for t in tasks:
        label, c, d, deps = t[:4]
        if label not in lid:
            lid[label] = len(labels)
            labels.append(label)
        tt.append(lid[label])
        cost.append(c)
        dur.append(d)
        idx.extend(deps)
        ptr.append(len(idx))
        par.append(t[4] if len(t) > 4 and t[4] is not None else -1)
    sizes = [len(tasks)] if stages is None else list(stages)
    wl = Workload(
        name=name, type_labels=labels,
        task_type=np.asarray(tt, dtype=np.int32),
        cost=np.asarray(cost, dtype=np.float64),
        duration=np.asarray(dur, dtype=np.float64),
        dep_ptr=np.asarray(ptr, dtype=np.int64),
        dep_idx=np.asarray(idx, dtype=np.int64),
        stage_ptr=np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64),
        parent=np.asarray(par, dtype=np.int64),
        create_cost_us=create_cost_us,
    )
    return wl
