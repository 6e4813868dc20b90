import csv
import io
import os

import numpy as np
import pytest

from predrt.bench import ConfigError, load_config, run_suite, write_results
from predrt.bench.cli import main
from predrt.bench.harness import build_config, means_csv, runs_csv


def write_cfg(tmp_path, text, name="suite.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


SMALL = """\
# two small benchmarks, three policies
bench = cholesky_dag:fine, stream_like:coarse
policy = busy, idle, prediction
reps = 5
cholesky_dag.tiles = 5
stream_like.waves = 3
stream_like.width = 16
"""


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_run_and_mean_row_counts(tmp_path):
    cfg = load_config(write_cfg(tmp_path, SMALL + f"out_dir = {tmp_path}/out\n"))
    res = run_suite(cfg)
    assert len(rows(runs_csv(res))) == 30
    assert len(rows(means_csv(res))) == 6
    assert res.violations == {}


def test_means_are_row_means(tmp_path):
    res = run_suite(load_config(write_cfg(tmp_path, SMALL)))
    runs = rows(runs_csv(res))
    for m in rows(means_csv(res)):
        mine = [r for r in runs if r["benchmark"] == m["benchmark"]
                and r["policy"] == m["policy"]]
        assert int(m["runs"]) == len(mine) == 5
        for col in ("makespan_us", "energy", "edp", "accuracy_pct"):
            vals = [r[col] for r in mine]
            if "NA" in vals:
                assert m[col] == "NA"
                continue
            expect = np.mean([float(v) for v in vals])
            assert float(m[col]) == pytest.approx(expect, rel=1e-6)


def test_rerun_gives_identical_files(tmp_path):
    text = SMALL + "emit_trace = true\n"
    a = write_results(run_suite(load_config(write_cfg(tmp_path, text))), tmp_path / "a")
    b = write_results(run_suite(load_config(write_cfg(tmp_path, text))), tmp_path / "b")
    assert len(a) == len(b) > 30
    for pa, pb in zip(sorted(a), sorted(b)):
        with open(pa, "rb") as fa, open(pb, "rb") as fb:
            assert fa.read() == fb.read()


def test_seeds_advance_per_rep(tmp_path):
    res = run_suite(load_config(write_cfg(tmp_path, SMALL + "seed = 10\n")))
    assert sorted({r.seed for r in res.rows}) == [10, 11, 12, 13, 14]


def test_overhead_mode_one_row_per_benchmark(tmp_path):
    cfg = load_config(write_cfg(tmp_path, SMALL + "mode = overhead\nreps = 2\n"))
    res = run_suite(cfg)
    assert [o["benchmark"] for o in res.overhead] == ["cholesky_dag-fine",
                                                      "stream_like-coarse"]
    # monitoring has no cost on the virtual clock
    assert all(o["relative_overhead"] == 0.0 for o in res.overhead)
    assert {r.policy for r in res.rows} == {"busy", "busy+monitoring"}


def test_output_files(tmp_path):
    out = tmp_path / "out"
    cfg = load_config(write_cfg(tmp_path, SMALL + "reps = 1\nemit_trace = yes\n"))
    write_results(run_suite(cfg), out)
    names = sorted(os.listdir(out))
    assert names == ["accuracy", "energy.csv", "means.csv", "runs.csv", "traces"]
    acc = (out / "accuracy" / "cholesky_dag-fine.busy.0.csv").read_text()
    assert acc.splitlines()[0] == "task_type,instances,avg_accuracy_pct"
    assert acc.splitlines()[-1].startswith("ALL,")
    assert (out / "energy.csv").read_text().startswith("run_id,policy,makespan_us,energy,edp\n")
    trace = (out / "traces" / "stream_like-coarse.idle.0.log").read_text()
    assert trace.startswith("# runtime=0 policy=idle n_cpus=8")


def test_sharing_scenario(tmp_path):
    text = """\
bench = gauss_seidel_barrier:coarse
share_with = stream_like:fine
share_policy = lewi, prediction
reps = 1
gauss_seidel_barrier.steps = 5
gauss_seidel_barrier.width = 4
stream_like.waves = 10
"""
    res = run_suite(load_config(write_cfg(tmp_path, text)))
    assert len(res.rows) == 4
    assert {r.peer for r in res.rows} == {"gauss_seidel_barrier-coarse",
                                          "stream_like-fine"}
    assert all(r.arbiter_calls is not None for r in res.rows)
    assert len(res.arbiter) == 2
    assert res.violations == {}


@pytest.mark.parametrize("text,where,msg", [
    ("bench = cholesky_dag\npolicy = busy, snooze\n", ":2", "unknown policy"),
    ("bench = lu_dag\n", ":1", "unknown benchmark"),
    ("\n\nreps\n", ":3", "key = value"),
    ("bench = cholesky_dag\ncholesky_dag.width = 3\n", ":2", "no parameter"),
    ("bench = cholesky_dag\nreps = two\n", ":2", "invalid literal"),
    ("bench = cholesky_dag\ncolour = red\n", ":2", "unknown key"),
])
def test_config_errors_carry_location(tmp_path, text, where, msg):
    path = write_cfg(tmp_path, text)
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    assert exc.value.where == path + where
    assert msg in str(exc.value)


def test_semantic_errors(tmp_path):
    with pytest.raises(ConfigError, match="reps"):
        load_config(write_cfg(tmp_path, "bench = cholesky_dag\nreps = 0\n"))
    with pytest.raises(ConfigError, match="virtual"):
        load_config(write_cfg(tmp_path, "bench = cholesky_dag\nbackend = real\n"
                                        "share_with = stream_like\n"))
    with pytest.raises(ConfigError, match="no benchmark"):
        load_config(write_cfg(tmp_path, "policy = busy\n"))


def test_flags_override_file(tmp_path):
    path = write_cfg(tmp_path, SMALL)
    cfg = build_config([("reps", "5", "f:1"), ("reps", "2", "--reps"),
                        ("bench", "multisaxpy:coarse", "--bench")])
    assert cfg.repetitions == 2
    assert [b.name for b in cfg.benchmarks] == ["multisaxpy-coarse"]


def test_cli_end_to_end(tmp_path, capsys):
    out = tmp_path / "cli"
    rc = main([write_cfg(tmp_path, SMALL), "--reps", "1", "--policy", "idle,prediction",
               "--cpus", "4", "--out-dir", str(out), "--emit-trace"])
    assert rc == 0
    text = capsys.readouterr().out
    assert text.startswith("benchmark,peer,policy,backend,runs")
    runs = rows((out / "runs.csv").read_text())
    assert len(runs) == 4 and {r["n_cpus"] for r in runs} == {"4"}
    assert len(os.listdir(out / "traces")) == 4


def test_cli_config_error_exit_code(tmp_path, capsys):
    assert main(["--bench", "nope"]) == 2
    assert "--bench" in capsys.readouterr().err
    assert main([str(tmp_path / "missing.cfg")]) == 2
    assert main(["--bench", "cholesky_dag", "--set", "oops"]) == 2


def test_cli_flags_cover_interface():
    from predrt.bench.cli import make_parser
    opts = {o for a in make_parser()._actions for o in a.option_strings}
    for flag in ("--bench", "--policy", "--backend", "--cpus", "--pred-rate-us",
                 "--ema-decay", "--seed", "--reps", "--out-dir", "--emit-trace",
                 "--share-with", "--share-policy"):
        assert flag in opts


def test_real_backend_small(tmp_path):
    cfg = build_config([("bench", "fine_grain_stress", "t"),
                        ("fine_grain_stress.tasks", "3000", "t"),
                        ("backend", "real", "t"), ("cpus", "2", "t"),
                        ("reps", "1", "t"), ("policy", "busy,prediction", "t")])
    res = run_suite(cfg)
    assert len(res.rows) == 2 and res.violations == {}
