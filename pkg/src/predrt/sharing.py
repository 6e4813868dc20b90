"""In-process CPU arbiter shared by two runtime instances.

Every CPU has an owner and a holder.  A CPU is in one of three states:

``held``      the owner holds and uses it,
``lent``      the owner gave it up; it sits in the pool, nominally still held
              by the owner, and either instance may acquire it,
``borrowed``  the peer holds it.

Reclaiming a borrowed CPU is cooperative: the arbiter flags it and tells the
borrower, who calls :meth:`Arbiter.vacate` at its next poll boundary.  The
CPU then goes back to the owner, who is notified through ``on_returned``.
"""
from __future__ import annotations

import csv
import io
import threading
from dataclasses import dataclass
from typing import Callable

HELD = "held_by_owner"
LENT = "lent"
BORROWED = "borrowed"

LEWI = "lewi"
HYBRID = "hybrid"
PREDICTION = "prediction"
SHARING_KINDS = (LEWI, HYBRID, PREDICTION)


class ArbiterError(Exception):
    pass


@dataclass(frozen=True)
class SharingPolicy:
    kind: str
    spin_budget: int = 100

    def __post_init__(self):
        if self.kind not in SHARING_KINDS:
            raise ValueError(f"unknown sharing policy {self.kind!r}")
        if self.spin_budget < 1:
            raise ValueError("hybrid spin budget must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "SharingPolicy":
        kind, _, arg = text.strip().partition(":")
        if arg:
            if kind != HYBRID:
                raise ValueError(f"sharing policy {kind!r} takes no argument")
            return cls(kind, int(arg))
        return cls(kind)

    def __str__(self):
        return self.kind


class Counters:
    __slots__ = ("lend", "acquire", "reclaim", "transferred")

    def __init__(self):
        self.lend = 0
        self.acquire = 0
        self.reclaim = 0
        self.transferred = 0

    @property
    def total(self) -> int:
        return self.lend + self.acquire + self.reclaim


class Arbiter:
    """Ownership ledger plus call counters.

    ``owners[c]`` is the runtime id owning CPU ``c``.  ``latency_us`` is the
    synthetic cost each entry point charges its caller; engines read it back
    and burn it (the arbiter itself never sleeps).
    """

    def __init__(self, owners: list[int], latency_us: float = 1.0,
                 clock: Callable[[], float] | None = None):
        self.owner = list(owners)
        self.holder = list(owners)
        self.state = [HELD] * len(owners)
        self.reclaim_pending = [False] * len(owners)
        self.latency_us = latency_us
        self.counters = {rid: Counters() for rid in sorted(set(owners))}
        self.on_reclaim: dict[int, Callable[[int], None]] = {}
        self.on_returned: dict[int, Callable[[int], None]] = {}
        self.clock = clock
        self.history: list[tuple] = []
        self._lock = threading.Lock()

    @property
    def n_cpus(self) -> int:
        return len(self.owner)

    def owned_by(self, rid: int) -> list[int]:
        return [c for c, o in enumerate(self.owner) if o == rid]

    def _record(self, cpu: int) -> None:
        t = self.clock() if self.clock is not None else len(self.history)
        self.history.append((t, cpu, self.holder[cpu], self.state[cpu]))

    # entry points ----------------------------------------------------------

    def lend_cpu(self, rid: int, cpu: int, count: bool = True) -> None:
        with self._lock:
            if self.holder[cpu] != rid or self.state[cpu] == LENT:
                raise ArbiterError(f"runtime {rid} lends cpu {cpu} it does not hold")
            self.state[cpu] = LENT
            self.holder[cpu] = self.owner[cpu]
            self.reclaim_pending[cpu] = False
            if count:
                self.counters[rid].lend += 1
            self._record(cpu)

    def acquire_cpus(self, rid: int, count: int) -> list[int]:
        """Take up to ``count`` pooled CPUs, own ones first.  One call."""
        if count < 1:
            raise ArbiterError("acquire count must be >= 1")
        with self._lock:
            got = []
            pool = [c for c in range(self.n_cpus) if self.state[c] == LENT]
            pool.sort(key=lambda c: self.owner[c] != rid)
            for c in pool[:count]:
                self.holder[c] = rid
                self.state[c] = HELD if self.owner[c] == rid else BORROWED
                got.append(c)
                self._record(c)
            ctr = self.counters[rid]
            ctr.acquire += 1
            ctr.transferred += len(got)
            return got

    def reclaim(self, rid: int, cpu: int) -> bool:
        """Ask the borrower of ``cpu`` to give it back.  No-op unless borrowed."""
        with self._lock:
            if (self.owner[cpu] != rid or self.state[cpu] != BORROWED
                    or self.reclaim_pending[cpu]):
                return False
            self.reclaim_pending[cpu] = True
            self.counters[rid].reclaim += 1
            borrower = self.holder[cpu]
        cb = self.on_reclaim.get(borrower)
        if cb is not None:
            cb(cpu)
        return True

    def vacate(self, rid: int, cpu: int) -> None:
        """Borrower hands ``cpu`` back to its owner (reclaim or shutdown)."""
        with self._lock:
            if self.holder[cpu] != rid or self.state[cpu] != BORROWED:
                raise ArbiterError(f"runtime {rid} vacates cpu {cpu} it did not borrow")
            owner = self.owner[cpu]
            self.holder[cpu] = owner
            self.state[cpu] = HELD
            self.reclaim_pending[cpu] = False
            self._record(cpu)
        cb = self.on_returned.get(owner)
        if cb is not None:
            cb(cpu)

    # reporting -------------------------------------------------------------

    def check_partition(self) -> None:
        for c in range(self.n_cpus):
            st, h, o = self.state[c], self.holder[c], self.owner[c]
            if st == BORROWED and h == o:
                raise ArbiterError(f"cpu {c} borrowed by its own owner")
            if st in (HELD, LENT) and h != o:
                raise ArbiterError(f"cpu {c} in state {st} held by non-owner {h}")

    def report_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["runtime", "lend_calls", "acquire_calls", "reclaim_calls",
                    "cpus_transferred"])
        for rid, c in self.counters.items():
            w.writerow([rid, c.lend, c.acquire, c.reclaim, c.transferred])
        return buf.getvalue()

    def total_calls(self) -> int:
        return sum(c.total for c in self.counters.values())


def check_history(history, owners) -> None:
    """Replay an arbiter history and check every CPU has exactly one holder
    consistent with its state at every step."""
    n = len(owners)
    holder = list(owners)
    state = [HELD] * n
    last_t = None
    for t, cpu, h, st in history:
        if last_t is not None and t < last_t:
            raise ArbiterError(f"history not time ordered at cpu {cpu} t={t}")
        last_t = t
        if not 0 <= cpu < n:
            raise ArbiterError(f"unknown cpu {cpu}")
        if st == BORROWED and h == owners[cpu]:
            raise ArbiterError(f"cpu {cpu} borrowed by its owner at t={t}")
        if st in (HELD, LENT) and h != owners[cpu]:
            raise ArbiterError(f"cpu {cpu} {st} but held by {h} at t={t}")
        # a borrowed cpu may only change hands through the pool or its owner
        if state[cpu] == BORROWED and st == BORROWED and h != holder[cpu]:
            raise ArbiterError(f"cpu {cpu} double held at t={t}")
        holder[cpu] = h
        state[cpu] = st
