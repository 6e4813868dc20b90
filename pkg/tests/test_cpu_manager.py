import itertools

import pytest

from predrt import cpu_manager as cm
from predrt.cpu_manager import CpuManager, Policy
from predrt.tasks import ReadyQueue, TaskDescriptor, TaskType


def manager(kind, n=8, target=None, parked=()):
    m = CpuManager(n, Policy.parse(kind))
    for c in parked:
        assert m.poll(c) is cm.PARK if kind == "idle" else True
    if target is not None:
        m.set_target(target)
    return m


def prediction_manager(n, active, target):
    """Prediction manager with ``n - active`` threads parked."""
    m = CpuManager(n, Policy("prediction"))
    m.set_target(0)
    for c in range(n - 1, active - 1, -1):
        assert m.poll(c) is cm.PARK
    m.set_target(target)
    assert m.active == active
    return m


def test_poll_parks_above_target():
    m = prediction_manager(8, 8, 6)
    v = m.execute_policy(0, cm.POLL)
    assert v.kind == cm.PARK_AND_RELEASE
    assert m.active == 7 and 0 in m.parked


def test_add_resumes_one_below_target():
    m = prediction_manager(8, 4, 6)
    v = m.execute_policy(None, cm.ADD)
    assert v.kind == cm.RESUMED and len(v.resumed) == 1
    assert m.active == 5


def test_equilibrium_is_noop():
    m = prediction_manager(8, 6, 6)
    assert m.execute_policy(0, cm.POLL) is cm.SPIN
    assert m.execute_policy(None, cm.ADD) is cm.SPIN
    assert m.active == 6


def test_add_without_parked_threads_is_noop():
    m = CpuManager(8, Policy("prediction"))
    m.set_target(8)
    assert m.add(3) == ()
    assert m.active == 8


def test_busy_never_parks():
    m = CpuManager(8, Policy("busy"))
    for _ in range(1000):
        assert m.poll(3) is cm.SPIN
    assert m.poll(3, polls=10**6) is cm.SPIN
    assert m.active == 8


def test_idle_parks_on_first_empty_poll():
    m = CpuManager(8, Policy("idle"))
    assert m.poll(2) is cm.PARK
    assert m.active == 7
    assert m.add(1) == (2,)
    assert m.active == 8


def test_hybrid_budget_resets_on_task():
    m = CpuManager(4, Policy.parse("hybrid:100"))
    assert m.poll(1, polls=99) is cm.SPIN
    m.task_dequeued(1)
    assert m.poll(1, polls=99) is cm.SPIN
    assert m.poll(1) is cm.PARK


def test_policy_parse():
    assert str(Policy.parse("hybrid:7")) == "hybrid:7"
    assert Policy.parse("hybrid").spin_budget == 100
    with pytest.raises(ValueError):
        Policy.parse("hybrid:0")
    with pytest.raises(ValueError):
        Policy.parse("busy:3")
    with pytest.raises(ValueError):
        Policy.parse("lazy")


def test_one_sided_corrections():
    # ADD never overshoots the target, POLL never undershoots it
    m = prediction_manager(8, 2, 5)
    m.add(100)
    assert m.active == 5
    m.set_target(3)
    for c in range(8):
        if m.occupied[c]:
            m.poll(c)
    assert m.active == 3


def test_unknown_action():
    with pytest.raises(cm.CpuManagerError):
        CpuManager(2, Policy("idle")).execute_policy(0, "KICK")


# lost wakeups ---------------------------------------------------------------
#
# Worker (after finding the queue empty):  W1 poll -> maybe park,
#                                          W2 re-check queue, re-ADD if nonempty
# Producer:                                P1 push a task,  P2 ADD
# Every interleaving must end with the task either taken by a running worker
# or the worker resumed.

WORKER = ("W1", "W2")
PRODUCER = ("P1", "P2")


def interleavings():
    for pos in itertools.combinations(range(4), 2):
        seq, w, p = [], iter(WORKER), iter(PRODUCER)
        for i in range(4):
            seq.append(next(w) if i in pos else next(p))
        yield seq


@pytest.mark.parametrize("kind", ["idle", "prediction"])
@pytest.mark.parametrize("seq", list(interleavings()))
def test_no_lost_wakeup(kind, seq):
    m = CpuManager(1, Policy(kind))
    m.set_target(1)
    q = ReadyQueue()
    task = TaskDescriptor(0, TaskType(0, "t"), 1.0, None, (), None)
    parked = False
    resumed = []
    if kind == "prediction":
        m.set_target(0)  # the stale prediction that lets the worker park
    for step in seq:
        if step == "W1":
            parked = m.poll(0) is cm.PARK
        elif step == "W2":
            if parked and q:
                resumed += m.add(len(q))
        elif step == "P1":
            q.push(task)
            if kind == "prediction":
                m.set_target(1)  # the new task lifts the prediction
        elif step == "P2":
            if m.parked:
                resumed += m.add(1)
    # quiescent: a task is queued, so the worker must not stay parked
    assert not parked or 0 in resumed
