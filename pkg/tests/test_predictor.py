import math

import pytest

from predrt.monitoring import TypeSnapshot
from predrt.predictor import Predictor, PredictorConfig, get_cpu_prediction
from predrt.engine import run_virtual
from predrt.bench import BenchmarkSpec, generate


def snap(label="t", ready=0.0, executing=0.0, alpha=None, m=0):
    return TypeSnapshot(label, ready, executing, alpha, m)


def test_empty_snapshot_gives_one():
    assert get_cpu_prediction([], 50.0, 8).target_cpus == 1


def test_single_type_formula():
    p = get_cpu_prediction([snap(ready=500, alpha=10, m=20)], 1000.0, 48)
    assert p.contributions == (("t", 5.0),)
    assert p.target_cpus == 5


def test_capped_by_instances():
    # beta = 12.3 with three live tasks
    p = get_cpu_prediction([snap(ready=123, alpha=5, m=3)], 50.0, 48)
    assert p.contributions[0][1] == pytest.approx(12.3)
    assert p.target_cpus == 3


def test_upper_clamp():
    p = get_cpu_prediction([snap(ready=200, alpha=1, m=1000)], 1.0, 48)
    assert p.target_cpus == 48


def test_types_without_alpha_count_instances():
    p = get_cpu_prediction([snap(ready=10, m=4), snap("u", ready=1, alpha=50, m=1)],
                           50.0, 8)
    assert p.target_cpus == 5


def test_min_cpus_zero():
    assert get_cpu_prediction([], 50.0, 8, min_cpus=0).target_cpus == 0


def test_stops_accumulating_when_full():
    s = [snap("a", ready=1000, alpha=1, m=50), snap("b", ready=5, alpha=1, m=5)]
    p = get_cpu_prediction(s, 50.0, 8)
    assert [c[0] for c in p.contributions] == ["a"]
    assert p.target_cpus == 8


def test_period_validated():
    with pytest.raises(ValueError):
        PredictorConfig(0.0)


class FakeMonitor:
    def __init__(self, s):
        self.s = s

    def snapshot(self):
        return self.s


def test_unchanged_workload_equal_predictions():
    published = []
    pr = Predictor(FakeMonitor([snap(ready=300, alpha=1, m=9)]), 8,
                   publish=published.append)
    a, b = pr.tick(0.0), pr.tick(50.0)
    assert a.target_cpus == b.target_cpus == 6
    assert len(published) == 2 and pr.ticks == 2


def test_drained_workload_gives_one():
    pr = Predictor(FakeMonitor([snap(alpha=3.0)]), 8)
    assert pr.tick(0.0).target_cpus == 1


def test_ticker_thread_runs_and_stops():
    import time
    pr = Predictor(FakeMonitor([]), 4, PredictorConfig(1000.0))
    pr.start(lambda: 0.0)
    time.sleep(0.02)
    pr.stop()
    assert pr.ticks >= 3


def test_two_phase_alpha_stabilises_at_six():
    wl = generate(BenchmarkSpec("two_phase_fig1", noise_sigma=0.0), 0)
    res = run_virtual(wl, "prediction", n_cpus=8)
    recs = [r for r in res.log if r.event == "prediction"]
    alpha_end = max(r.timestamp_us for r in res.log
                    if r.event == "end" and r.task < wl.meta["alpha_tasks"])
    in_alpha = [r.task for r in recs if r.timestamp_us < alpha_end]
    # the first tick already sees six live chains
    assert in_alpha[0] == 6 and set(in_alpha) == {6}
