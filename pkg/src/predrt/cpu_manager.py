"""CPU manager: decides when worker threads park, spin or get resumed.

The manager owns the active CPU count (``active``) and the predicted target
(``target``).  Engines call :meth:`CpuManager.poll` when a thread found the
ready queue empty and :meth:`CpuManager.add` when tasks were enqueued.  The
manager never touches threads itself; it returns which threads must park or
resume and the engine carries that out.

Thread ``i`` is bound to CPU slot ``i``, so a resumed thread implies the
slot it occupies.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import NamedTuple

BUSY = "busy"
IDLE = "idle"
HYBRID = "hybrid"
PREDICTION = "prediction"
POLICY_KINDS = (BUSY, IDLE, HYBRID, PREDICTION)

POLL = "POLL"
ADD = "ADD"

CONTINUE_SPIN = "continue_spin"
PARK_AND_RELEASE = "park_and_release"
RESUMED = "resumed"

DEFAULT_SPIN_BUDGET = 100


@dataclass(frozen=True)
class Policy:
    kind: str
    spin_budget: int = DEFAULT_SPIN_BUDGET

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy {self.kind!r}")
        if self.spin_budget < 1:
            raise ValueError("hybrid spin budget must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "Policy":
        """``busy``, ``idle``, ``prediction``, ``hybrid`` or ``hybrid:<polls>``."""
        kind, _, arg = text.strip().partition(":")
        if arg:
            if kind != HYBRID:
                raise ValueError(f"policy {kind!r} takes no argument")
            return cls(kind, int(arg))
        return cls(kind)

    def __str__(self):
        if self.kind == HYBRID and self.spin_budget != DEFAULT_SPIN_BUDGET:
            return f"{self.kind}:{self.spin_budget}"
        return self.kind


class Verdict(NamedTuple):
    kind: str
    resumed: tuple = ()


SPIN = Verdict(CONTINUE_SPIN)
PARK = Verdict(PARK_AND_RELEASE)


class CpuManagerError(Exception):
    pass


class CpuManager:
    """Active-CPU bookkeeping for one runtime instance.

    ``held`` restricts which slots the instance may occupy; it only matters
    when CPUs are shared with another runtime (see :mod:`predrt.sharing`).
    """

    def __init__(self, n_cpus: int, policy: Policy, *, held=None,
                 single_resume: bool = False):
        if n_cpus < 1:
            raise ValueError("n_cpus must be >= 1")
        self.n_cpus = n_cpus
        self.policy = policy
        self.single_resume = single_resume
        held = range(n_cpus) if held is None else sorted(held)
        self.target = len(held)
        self.active = len(held)
        self.occupied = [False] * n_cpus
        for c in held:
            self.occupied[c] = True
        self.parked: dict[int, None] = {}
        self.spins = [0] * n_cpus
        self.parks = 0
        self.resumes = 0
        self._lock = threading.Lock()

    def set_target(self, target: int) -> None:
        self.target = target

    # entry points ------------------------------------------------------------

    def execute_policy(self, thread: int | None, action: str, count: int = 1,
                       polls: int = 1) -> Verdict:
        if action == POLL:
            return self.poll(thread, polls)
        if action == ADD:
            resumed = self.add(count)
            return Verdict(RESUMED, resumed) if resumed else SPIN
        raise CpuManagerError(f"unknown action {action!r}")

    def poll(self, thread: int, polls: int = 1) -> Verdict:
        """``thread`` found the ready queue empty ``polls`` times in a row."""
        kind = self.policy.kind
        if kind == BUSY:
            return SPIN
        with self._lock:
            if kind == IDLE:
                return self._park(thread)
            if kind == HYBRID:
                self.spins[thread] += polls
                if self.spins[thread] >= self.policy.spin_budget:
                    self.spins[thread] = 0
                    return self._park(thread)
                return SPIN
            if self.active > self.target:
                return self._park(thread)
            return SPIN

    def add(self, count: int = 1) -> tuple:
        """Tasks were enqueued; return the threads to resume, if any."""
        kind = self.policy.kind
        if kind == BUSY or not self.parked:
            return ()
        with self._lock:
            if kind == PREDICTION:
                # one ADD per enqueued task, each resuming at most one thread
                limit = 1 if self.single_resume else count
                out = []
                while self.active < self.target and self.parked and len(out) < limit:
                    out.append(self._resume_one())
                return tuple(out)
            n = min(count, len(self.parked))
            return tuple(self._resume_one() for _ in range(n))

    def task_dequeued(self, thread: int) -> None:
        if self.spins[thread]:
            self.spins[thread] = 0

    # slot ownership changes driven by the sharing arbiter --------------------

    def release(self, thread: int) -> None:
        """An occupied slot leaves this instance (lent away)."""
        with self._lock:
            if not self.occupied[thread]:
                raise CpuManagerError(f"slot {thread} is not occupied")
            self.occupied[thread] = False
            self.active -= 1

    def release_idle(self, thread: int) -> None:
        """A parked thread's slot leaves this instance."""
        with self._lock:
            if thread not in self.parked:
                raise CpuManagerError(f"thread {thread} is not parked")
            del self.parked[thread]

    def occupy(self, thread: int) -> None:
        """A slot gained from the arbiter is occupied by its thread."""
        with self._lock:
            if self.occupied[thread]:
                raise CpuManagerError(f"slot {thread} already occupied")
            self.parked.pop(thread, None)
            self.occupied[thread] = True
            self.active += 1

    # internals -------------------------------------------------------------

    def _park(self, thread: int) -> Verdict:
        if not self.occupied[thread]:
            raise CpuManagerError(f"thread {thread} parks from a free slot")
        self.active -= 1
        self.occupied[thread] = False
        self.parked[thread] = None
        self.parks += 1
        return PARK

    def _resume_one(self) -> int:
        thread = next(iter(self.parked))
        del self.parked[thread]
        self.occupied[thread] = True
        self.active += 1
        self.resumes += 1
        return thread
