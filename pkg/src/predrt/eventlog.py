"""Event log shared by both engines.

Records dump as ``timestamp_us,event,cpu,thread,task,task_type`` lines;
absent fields are left empty.  ``prediction`` records reuse the last two
columns: ``task`` holds the predicted CPU count and ``task_type`` the
per-type contributions as ``label=value`` pairs joined by ``;``.

A dump starts with one ``#`` header line carrying the metadata needed to
replay it: runtime id, policy, CPU count and the initial state of every CPU
slot (``O`` occupied, ``I`` idle, ``L`` lent/not held).
"""
from __future__ import annotations

import io
from array import array
from typing import Iterator, NamedTuple

import numpy as np

EVENTS = ("create", "ready", "start", "end", "park", "resume", "lend",
          "reclaim", "prediction")
CREATE, READY, START, END, PARK, RESUME, LEND, RECLAIM, PREDICTION = range(9)
EVENT_CODES = {name: i for i, name in enumerate(EVENTS)}


class LogFormatError(ValueError):
    pass


class Record(NamedTuple):
    timestamp_us: float
    event: str
    cpu: int | None
    thread: int | None
    task: int | None
    task_type: str | None


def _opt(x: int) -> int | None:
    return None if x < 0 else x


class EventLog:
    """Append-only columnar log.

    ``type_labels`` is shared with the producer and may grow while the log
    is being written.
    """

    def __init__(self, n_cpus: int, type_labels: list | None = None,
                 runtime_id: int = 0, policy: str = "", initial: str | None = None):
        self.n_cpus = n_cpus
        self.type_labels = type_labels if type_labels is not None else []
        self.runtime_id = runtime_id
        self.policy = policy
        self.initial = initial if initial is not None else "O" * n_cpus
        if len(self.initial) != n_cpus:
            raise ValueError("initial slot states must cover every cpu")
        self.t = array("d")
        self.ev = array("b")
        self.cpu = array("i")
        self.thread = array("i")
        self.task = array("q")
        self.ttype = array("i")
        self.details: dict[int, str] = {}

    def add(self, t, ev, cpu=-1, thread=-1, task=-1, ttype=-1) -> None:
        self.t.append(t)
        self.ev.append(ev)
        self.cpu.append(cpu)
        self.thread.append(thread)
        self.task.append(task)
        self.ttype.append(ttype)

    def add_prediction(self, t, target, contributions) -> None:
        self.details[len(self.t)] = ";".join(f"{label}={beta:.6g}"
                                             for label, beta in contributions)
        self.add(t, PREDICTION, -1, -1, target, -1)

    def extend_sorted(self, rows) -> None:
        """Append ``(t, ev, cpu, thread, task, ttype[, detail])`` rows sorted by time."""
        for row in sorted(rows, key=lambda r: r[0]):
            if len(row) == 7:
                self.details[len(self.t)] = row[6]
            self.add(*row[:6])

    def __len__(self):
        return len(self.t)

    def record(self, i: int) -> Record:
        ev = self.ev[i]
        if ev == PREDICTION:
            return Record(self.t[i], EVENTS[ev], None, None, self.task[i],
                          self.details.get(i, ""))
        tt = self.ttype[i]
        return Record(self.t[i], EVENTS[ev], _opt(self.cpu[i]), _opt(self.thread[i]),
                      _opt(self.task[i]), None if tt < 0 else self.type_labels[tt])

    def __iter__(self) -> Iterator[Record]:
        for i in range(len(self.t)):
            yield self.record(i)

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "t": np.frombuffer(self.t, dtype=np.float64).copy(),
            "ev": np.frombuffer(self.ev, dtype=np.int8).copy(),
            "cpu": np.frombuffer(self.cpu, dtype=np.int32).copy(),
            "thread": np.frombuffer(self.thread, dtype=np.int32).copy(),
            "task": np.frombuffer(self.task, dtype=np.int64).copy(),
            "ttype": np.frombuffer(self.ttype, dtype=np.int32).copy(),
        }

    def count(self, event: str) -> int:
        return int(np.count_nonzero(self.arrays()["ev"] == EVENT_CODES[event]))

    def header(self) -> str:
        return (f"# runtime={self.runtime_id} policy={self.policy} "
                f"n_cpus={self.n_cpus} initial={self.initial}")

    def dumps(self) -> str:
        out = io.StringIO()
        self.dump(out)
        return out.getvalue()

    def dump(self, fh) -> None:
        fh.write(self.header() + "\n")
        labels = self.type_labels
        t, ev, cpu, thread, task, ttype = (self.t, self.ev, self.cpu, self.thread,
                                           self.task, self.ttype)
        write = fh.write
        for i in range(len(t)):
            e = ev[i]
            if e == PREDICTION:
                write(f"{t[i]:.3f},prediction,,,{task[i]},{self.details.get(i, '')}\n")
                continue
            c, th, tk, ty = cpu[i], thread[i], task[i], ttype[i]
            write(f"{t[i]:.3f},{EVENTS[e]},{'' if c < 0 else c},{'' if th < 0 else th},"
                  f"{'' if tk < 0 else tk},{'' if ty < 0 else labels[ty]}\n")

    @classmethod
    def loads(cls, text: str) -> "EventLog":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("#"):
            raise LogFormatError("missing '#' header line")
        meta = dict(kv.split("=", 1) for kv in lines[0][1:].split())
        try:
            log = cls(int(meta["n_cpus"]), [], int(meta.get("runtime", 0)),
                      meta.get("policy", ""), meta.get("initial"))
        except (KeyError, ValueError) as exc:
            raise LogFormatError(f"bad header: {lines[0]!r}") from exc
        label_ids: dict[str, int] = {}
        for lineno, line in enumerate(lines[1:], start=2):
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 6 or parts[1] not in EVENT_CODES:
                raise LogFormatError(f"line {lineno}: {line!r}")
            ev = EVENT_CODES[parts[1]]
            try:
                ts = float(parts[0])
                if ev == PREDICTION:
                    log.details[len(log.t)] = parts[5]
                    log.add(ts, ev, -1, -1, int(parts[4]), -1)
                    continue
                fields = [int(p) if p else -1 for p in parts[2:5]]
            except ValueError as exc:
                raise LogFormatError(f"line {lineno}: {line!r}") from exc
            label = parts[5]
            tt = -1
            if label:
                tt = label_ids.get(label)
                if tt is None:
                    tt = label_ids[label] = len(log.type_labels)
                    log.type_labels.append(label)
            log.add(ts, ev, fields[0], fields[1], fields[2], tt)
        return log
