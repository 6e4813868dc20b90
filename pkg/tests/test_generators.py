from math import comb

import numpy as np
import pytest

from predrt.bench import BenchmarkSpec, SpecError, generate
from predrt.bench.generators import cholesky_counts
from predrt.workload import creation_order


def brute_cholesky(n):
    """Enumerate the right-looking tile algorithm directly."""
    counts = {"potrf": 0, "trsm": 0, "syrk": 0, "gemm": 0}
    for k in range(n):
        counts["potrf"] += 1
        for i in range(k + 1, n):
            counts["trsm"] += 1
        for i in range(k + 1, n):
            counts["syrk"] += 1
            for j in range(k + 1, i):
                counts["gemm"] += 1
    return counts


def type_counts(wl):
    return {label: int((wl.task_type == i).sum()) for i, label in enumerate(wl.type_labels)}


def test_cholesky_four_tiles():
    wl = generate(BenchmarkSpec("cholesky_dag", params={"tiles": 4}), 0)
    assert type_counts(wl) == {"potrf": 4, "trsm": 6, "syrk": 6, "gemm": 4}
    assert wl.n_tasks == 20


@pytest.mark.parametrize("n", range(1, 17))
def test_cholesky_counts_closed_form(n):
    oracle = brute_cholesky(n)
    assert cholesky_counts(n) == oracle
    wl = generate(BenchmarkSpec("cholesky_dag", params={"tiles": n}), 0)
    got = type_counts(wl)
    assert {k: got.get(k, 0) for k in oracle} == oracle
    assert wl.n_tasks == n + 2 * comb(n, 2) + comb(n, 3)


def test_cholesky_dependencies():
    wl = generate(BenchmarkSpec("cholesky_dag", params={"tiles": 3}), 0)
    # potrf(0) is the only root; the last potrf depends on the last syrk
    roots = [i for i in range(wl.n_tasks) if len(wl.deps(i)) == 0]
    assert roots == [0]
    last = wl.n_tasks - 1
    assert wl.type_labels[wl.task_type[last]] == "potrf"
    assert wl.type_labels[wl.task_type[wl.deps(last)[0]]] == "syrk"
    assert creation_order(wl) is None  # index order is topological


def test_stream_three_waves():
    wl = generate(BenchmarkSpec("stream_like", params={"waves": 3, "width": 64}), 0)
    assert wl.n_tasks == 192
    assert wl.n_stages == 3
    assert len(wl.dep_idx) == 0
    # equal cost inside a wave
    for s in range(3):
        a, b = wl.stage_ptr[s], wl.stage_ptr[s + 1]
        assert len(set(wl.cost[a:b])) == 1


def test_gauss_seidel_barriers():
    wl = generate(BenchmarkSpec("gauss_seidel_barrier", params={"steps": 7, "width": 10}), 0)
    assert wl.n_stages == 7 and wl.n_tasks == 70
    assert wl.cost.min() >= 100 and wl.cost.max() <= 400


def test_two_phase_shape():
    wl = generate(BenchmarkSpec("two_phase_fig1", params={"alpha_waves": 3,
                                                          "beta_waves": 4}), 0)
    labels = np.array(wl.type_labels)[wl.task_type]
    assert (labels == "alpha").sum() == 18
    assert (labels == "beta").sum() == 16
    assert (labels == "lane").sum() == 2
    # average width of the second phase: four chains plus a half-time lane
    assert ((labels == "beta").sum() + (labels == "lane").sum()) / 4 == 4.5


def test_fine_grain_default_size():
    wl = generate(BenchmarkSpec("fine_grain_stress"), 0)
    assert wl.n_tasks >= 10**6
    assert wl.cost.min() >= 1 and wl.cost.max() <= 10


def test_deterministic():
    spec = BenchmarkSpec("multisaxpy", params={"iterations": 3})
    a, b = generate(spec, 4), generate(spec, 4)
    assert np.array_equal(a.duration, b.duration)
    assert np.array_equal(a.dep_idx, b.dep_idx)
    assert not np.array_equal(a.duration, generate(spec, 5).duration)


def test_exact_mode_is_cost_proportional():
    wl = generate(BenchmarkSpec("gauss_seidel_barrier", params={"steps": 2}, noise_sigma=0.0), 0)
    ratio = wl.duration / wl.cost
    assert np.allclose(ratio, ratio[0])


@pytest.mark.parametrize("kind,params", [
    ("cholesky_dag", {"tiles": 0}),
    ("cholesky_dag", {"tiles": 2.5}),
    ("stream_like", {"base_us": -1.0}),
    ("multisaxpy", {"tiles": 3}),
    ("gauss_seidel_barrier", {"min_cost": 5, "max_cost": 2}),
])
def test_invalid_params_rejected(kind, params):
    with pytest.raises(SpecError):
        generate(BenchmarkSpec(kind, params=params), 0)


def test_unknown_kind_rejected():
    with pytest.raises(SpecError):
        BenchmarkSpec("lu_dag")
    with pytest.raises(SpecError):
        BenchmarkSpec("stream_like", "medium")
