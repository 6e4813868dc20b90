"""Optimal-CPU-count prediction from a monitoring snapshot."""
from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

DEFAULT_PERIOD_US = 50.0

# ceil() tolerance so 5.000000000001 from float sums still rounds to 5
_CEIL_EPS = 1e-9


@dataclass(frozen=True)
class PredictorConfig:
    period_us: float = DEFAULT_PERIOD_US
    min_cpus: int = 1

    def __post_init__(self):
        if not self.period_us > 0:
            raise ValueError("prediction period must be positive")
        if self.min_cpus not in (0, 1):
            raise ValueError("min_cpus must be 0 or 1")


class Prediction(NamedTuple):
    target_cpus: int
    timestamp: float
    contributions: tuple  # ((label, beta), ...) for the types visited


def get_cpu_prediction(snapshot: Sequence, period_us: float, n_cpus: int,
                       min_cpus: int = 1, timestamp: float = 0.0) -> Prediction:
    """Predict how many CPUs the live workload needs over the next period.

    Each type's ready plus executing cost, times its unitary cost, is the
    time needed to drain it; divided by the period that is a CPU count.
    Types without a unitary cost yet fall back to their live instance count.
    Accumulation stops as soon as the machine is full.  The result is capped
    by the number of live tasks and clamped to ``[min_cpus, n_cpus]``.
    """
    if n_cpus < 1:
        raise ValueError("n_cpus must be >= 1")
    gamma = 0.0
    contributions = []
    live = 0
    for entry in snapshot:
        live += entry.instances
        if gamma >= n_cpus:
            continue
        if entry.unitary_cost is None:
            beta = float(entry.instances)
        else:
            beta = (entry.ready + entry.executing) * entry.unitary_cost / period_us
        gamma += beta
        contributions.append((entry.label, beta))
    need = math.ceil(gamma - _CEIL_EPS) if gamma > 0 else 0
    target = min(need, live)
    target = max(min_cpus, min(target, n_cpus))
    return Prediction(target, timestamp, tuple(contributions))


class Predictor:
    """Computes a prediction at every tick and hands it to ``publish``.

    The virtual engine calls :meth:`tick` from its event loop; the threaded
    engine uses :meth:`start` to run a dedicated ticker thread.
    """

    def __init__(self, monitor, n_cpus: int, config: PredictorConfig | None = None,
                 publish: Callable[[Prediction], None] | None = None):
        self.monitor = monitor
        self.n_cpus = n_cpus
        self.config = config or PredictorConfig()
        self.publish = publish
        self.last: Prediction | None = None
        self.ticks = 0
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def tick(self, now: float) -> Prediction:
        pred = get_cpu_prediction(self.monitor.snapshot(), self.config.period_us,
                                  self.n_cpus, self.config.min_cpus, now)
        self.last = pred
        self.ticks += 1
        if self.publish is not None:
            self.publish(pred)
        return pred

    def start(self, clock: Callable[[], float]) -> None:
        period_s = self.config.period_us * 1e-6

        def loop():
            next_t = time.perf_counter() + period_s
            while not self._stop.is_set():
                delay = next_t - time.perf_counter()
                if delay > 0:
                    if self._stop.wait(delay):
                        break
                elif delay < -period_s:
                    next_t = time.perf_counter()  # fell behind; do not burst
                next_t += period_s
                self.tick(clock())

        self._stop.clear()
        self._thread = threading.Thread(target=loop, name="predictor", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
            self._thread = None
