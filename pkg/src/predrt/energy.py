"""Energy and energy-delay product from an event log.

Every CPU slot is in one of four states; the log's events move slots
between them:

========  ==================  =================
state     entered by          billed at
========  ==================  =================
exec      start               ``p_active``
spin      end, resume,        ``p_spin``
          reclaim
parked    park                ``p_idle``
lent      lend                ``p_idle``
========  ==================  =================

A slot that was resumed but has not picked a task yet counts as spinning.
A lent slot is billed as idle from the lender's point of view; whatever the
peer does on it shows up in the peer's own log.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import eventlog as el

EXEC, SPIN, PARKED, LENT = range(4)
STATE_NAMES = ("exec", "spin", "parked", "lent")

# state a slot is in after each event kind (-1: event does not touch slots)
_AFTER = np.full(len(el.EVENTS), -1, dtype=np.int8)
_AFTER[[el.START, el.END, el.PARK, el.RESUME, el.LEND, el.RECLAIM]] = \
    [EXEC, SPIN, PARKED, SPIN, LENT, SPIN]

# allowed state before each event kind
_ALLOWED = np.zeros((len(el.EVENTS), 4), dtype=bool)
_ALLOWED[el.START, SPIN] = True
_ALLOWED[el.END, EXEC] = True
_ALLOWED[el.PARK, SPIN] = True
_ALLOWED[el.RESUME, PARKED] = True
_ALLOWED[el.LEND, [SPIN, PARKED]] = True
_ALLOWED[el.RECLAIM, LENT] = True

_INITIAL = {"O": SPIN, "I": PARKED, "L": LENT}


class MalformedLogError(ValueError):
    def __init__(self, message, record=None):
        super().__init__(message if record is None else f"{message}: {record}")
        self.record = record


@dataclass(frozen=True)
class EnergyConfig:
    p_active: float = 1.0
    p_idle: float = 0.1
    p_spin: float = 1.0

    def __post_init__(self):
        if min(self.p_active, self.p_idle, self.p_spin) < 0:
            raise ValueError("power constants must be >= 0")
        if not self.p_idle < self.p_spin:
            raise ValueError("p_idle must be below p_spin")

    def scaled(self, c: float) -> "EnergyConfig":
        return EnergyConfig(self.p_active * c, self.p_idle * c, self.p_spin * c)

    def powers(self) -> np.ndarray:
        return np.array([self.p_active, self.p_spin, self.p_idle, self.p_idle])


class EnergyReport(NamedTuple):
    run_id: str
    policy: str
    makespan_us: float
    energy: float
    edp: float
    state_time_us: tuple  # total slot time per state, in STATE_NAMES order

    @property
    def active_time_us(self) -> float:
        return self.state_time_us[EXEC] + self.state_time_us[SPIN]


def makespan_of(log: el.EventLog) -> float:
    """Time of the last task end (0 for a log without tasks)."""
    a = log.arrays()
    ends = a["t"][a["ev"] == el.END]
    return float(ends.max()) if len(ends) else 0.0


def state_intervals(log: el.EventLog, makespan: float | None = None):
    """Rebuild each slot's state timeline clipped to ``[0, makespan]``.

    Returns arrays ``(cpu, t0, t1, state)``, one row per interval.  Raises
    :class:`MalformedLogError` on the first illegal transition.
    """
    if makespan is None:
        makespan = makespan_of(log)
    a = log.arrays()
    ev = a["ev"].astype(np.intp)
    after = _AFTER[ev]
    sel = np.flatnonzero((after >= 0) & (a["cpu"] >= 0))
    bad = np.flatnonzero((after >= 0) & (a["cpu"] >= log.n_cpus))
    if len(bad):
        raise MalformedLogError("event on an unknown cpu", log.record(int(bad[0])))
    initial = np.array([_INITIAL[ch] for ch in log.initial], dtype=np.int8)

    # group per cpu; the log is time ordered so a stable sort keeps order
    order = sel[np.argsort(a["cpu"][sel], kind="stable")]
    cpu = a["cpu"][order].astype(np.intp)
    t = a["t"][order]
    new = after[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = cpu[1:] != cpu[:-1]
    prev = np.empty(len(order), dtype=np.int8)
    prev[first] = initial[cpu[first]]
    prev[~first] = new[:-1][~first[1:]]
    ok = _ALLOWED[ev[order], prev]
    if not ok.all():
        k = int(np.flatnonzero(~ok)[0])
        raise MalformedLogError(
            f"illegal {el.EVENTS[ev[order[k]]]} from state {STATE_NAMES[prev[k]]}",
            log.record(int(order[k])))

    # interval k runs from event k to the next event on the same cpu
    last = np.ones(len(order), dtype=bool)
    last[:-1] = cpu[:-1] != cpu[1:]
    t_next = np.empty(len(order))
    t_next[~last] = t[1:][~last[:-1]]
    t_next[last] = makespan
    # leading interval of every cpu, in its initial state
    n = log.n_cpus
    lead_end = np.full(n, makespan)
    lead_end[cpu[first]] = t[first]
    cpus = np.concatenate([np.arange(n), cpu])
    t0 = np.concatenate([np.zeros(n), t])
    t1 = np.concatenate([lead_end, t_next])
    state = np.concatenate([initial, new])
    t0 = np.clip(t0, 0.0, makespan)
    t1 = np.clip(t1, 0.0, makespan)
    return cpus, t0, t1, state


def compute_edp(log: el.EventLog, config: EnergyConfig = EnergyConfig(),
                makespan: float | None = None, run_id: str = "") -> EnergyReport:
    if makespan is None:
        makespan = makespan_of(log)
    _, t0, t1, state = state_intervals(log, makespan)
    dt = t1 - t0
    per_state = np.bincount(state, weights=dt, minlength=4)
    energy = float(per_state @ config.powers())
    return EnergyReport(run_id, log.policy, float(makespan), energy,
                        energy * float(makespan), tuple(float(x) for x in per_state))


def active_timeline(log: el.EventLog, makespan: float | None = None):
    """Step function of the number of occupied (exec or spin) slots.

    Returns ``(times, counts)``: ``counts[k]`` holds on ``[times[k], times[k+1])``.
    """
    cpus, t0, t1, state = state_intervals(log, makespan)
    occ = (state == EXEC) | (state == SPIN)
    keep = occ & (t1 > t0)
    times = np.concatenate([t0[keep], t1[keep]])
    delta = np.concatenate([np.ones(keep.sum()), -np.ones(keep.sum())])
    order = np.argsort(times, kind="stable")
    times, delta = times[order], delta[order]
    uniq, idx = np.unique(times, return_index=True)
    counts = np.cumsum(np.add.reduceat(delta, idx)) if len(times) else np.zeros(0)
    return uniq, counts.astype(int)


def report_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run_id", "policy", "makespan_us", "energy", "edp"])
    for r in reports:
        w.writerow([r.run_id, r.policy, f"{r.makespan_us:.3f}", f"{r.energy:.6g}",
                    f"{r.edp:.6g}"])
    return buf.getvalue()
