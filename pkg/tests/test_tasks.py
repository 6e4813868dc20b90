import pytest

from predrt.tasks import CREATED, EXECUTING, FINISHED, READY, TaskError, TaskGraph
from predrt.engine import run_virtual
from predrt.workload import from_lists
from predrt import eventlog as el


def make_graph():
    log = {"ready": [], "added": []}
    g = TaskGraph(on_ready=lambda ts: log["ready"].extend(t.id for t in ts),
                  on_added=lambda ts: log["added"].append([t.id for t in ts]))
    return g, log


def run_task(g, tid, now=1.0):
    task = g.queue.pop()
    assert task.id == tid
    g.start_task(task, now - 1.0)
    return g.complete_task(tid, now)


def test_zero_cost_task_is_valid():
    g, _ = make_graph()
    t = g.task_type("x")
    tid = g.create_task(t, 0.0)
    assert g.tasks[tid].cost == 0.0
    assert g.tasks[tid].status == READY


def test_satisfied_deps_make_task_ready():
    g, log = make_graph()
    t = g.task_type("x")
    a = g.create_task(t, 1.0)
    run_task(g, a)
    b = g.create_task(t, 100.0, {a})
    assert g.tasks[b].status == READY
    assert g.queue.ids() == [b]
    assert log["added"][-1] == [b]


def test_unfinished_dep_defers_ready():
    g, _ = make_graph()
    t = g.task_type("x")
    a = g.create_task(t, 1.0)
    b = g.create_task(t, 5.0, {a})
    assert g.tasks[b].status == CREATED
    assert g.queue.ids() == [a]
    run_task(g, a)
    assert g.tasks[b].status == READY
    assert g.queue.ids() == [b]


def test_unfinished_dep_replayed_on_virtual_clock():
    # two-task schedule: b waits for a even with a free CPU
    wl = from_lists("two", [("x", 1.0, 10.0, []), ("x", 5.0, 5.0, [0])])
    res = run_virtual(wl, "busy", n_cpus=2)
    recs = [r for r in res.log if r.event in ("ready", "start", "end")]
    b_ready = next(r.timestamp_us for r in recs if r.event == "ready" and r.task == 1)
    a_end = next(r.timestamp_us for r in recs if r.event == "end" and r.task == 0)
    assert b_ready == a_end == 10.0
    assert res.makespan_us == 15.0


def test_last_dependency_enqueues_once():
    g, log = make_graph()
    t = g.task_type("x")
    a = g.create_task(t, 1.0)
    b = g.create_task(t, 1.0)
    x = g.create_task(t, 1.0, {a, b})
    run_task(g, a)
    assert x not in log["ready"]
    run_task(g, b)
    assert log["ready"].count(x) == 1


def test_three_dependents_one_released():
    # root r; d1 needs r; d2 needs r and p; d3 needs r and q
    g, log = make_graph()
    t = g.task_type("x")
    r = g.create_task(t, 1.0)
    p = g.create_task(t, 1.0)
    q = g.create_task(t, 1.0)
    d1 = g.create_task(t, 1.0, {r})
    d2 = g.create_task(t, 1.0, {r, p})
    d3 = g.create_task(t, 1.0, {r, q})
    before = len(log["added"])
    run_task(g, r)
    assert log["added"][before:] == [[d1]]
    assert g.tasks[d2].status == CREATED and g.tasks[d3].status == CREATED


def test_complete_finished_task_faults():
    g, _ = make_graph()
    t = g.task_type("x")
    a = g.create_task(t, 1.0)
    run_task(g, a)
    with pytest.raises(TaskError):
        g.complete_task(a, 2.0)


def test_complete_ready_task_faults():
    g, _ = make_graph()
    a = g.create_task(g.task_type("x"), 1.0)
    with pytest.raises(TaskError):
        g.complete_task(a, 2.0)


def test_negative_cost_and_unknown_dep_rejected():
    g, _ = make_graph()
    t = g.task_type("x")
    with pytest.raises(TaskError):
        g.create_task(t, -1.0)
    with pytest.raises(TaskError):
        g.create_task(t, 1.0, {7})


def test_type_ids_unique():
    g, _ = make_graph()
    ids = {g.task_type(label).id for label in "abcab"}
    assert ids == {0, 1, 2}


def test_status_sequence_and_record():
    g, _ = make_graph()
    a = g.create_task(g.task_type("x"), 2.0)
    task = g.queue.pop()
    assert task.status == EXECUTING
    g.start_task(task, 3.0)
    rec = g.complete_task(a, 7.5)
    assert task.status == FINISHED
    assert rec.execution_time == 4.5


def test_add_actions_match_ready_transitions(chain3):
    res = run_virtual(chain3, "idle", n_cpus=2)
    a = res.log.arrays()
    assert (a["ev"] == el.READY).sum() == len(chain3.cost)
