"""
Two runtimes, one machine
=========================

A barrier-heavy Gauss-Seidel sweep shares eight CPUs with a stream of
small kernels.  Lend-when-idle talks to the arbiter every time a thread
runs dry; the predictive variant only lends what the forecast says is
spare and borrows when its own forecast outgrows its CPUs.
"""

from predrt import run_shared_virtual, validate_run
from predrt.bench import generate, sharing_pair

gs_spec, stream_spec = sharing_pair()
pair = (generate(gs_spec, 0), generate(stream_spec, 1))

# both runtimes alone on their four CPUs first
from predrt import run_virtual
alone = [run_virtual(w, "prediction", n_cpus=4).makespan_us for w in pair]
print("alone: gauss-seidel %.0f us, stream %.0f us" % tuple(alone))

shared = {}
for policy in ("lewi", "hybrid", "prediction"):
    out = run_shared_virtual(pair, policy, cpus_each=4)
    shared[policy] = out
    mk = [r.makespan_us for r in out.results]
    print(f"{policy:>10}: gauss-seidel {mk[0]:8.0f} us  stream {mk[1]:8.0f} us  "
          f"arbiter calls {out.arbiter.total_calls():6d}")
    for r in out.results:
        assert validate_run(r, out.arbiter, sharing_gate=policy == "prediction") == []

lewi, pred = shared["lewi"], shared["prediction"]
print("calls ratio %.3f" % (pred.arbiter.total_calls() / lewi.arbiter.total_calls()))
print("stream speedup %.3f" % (lewi.results[1].makespan_us / pred.results[1].makespan_us))

# per-runtime breakdown of the arbiter traffic
print(pred.arbiter.report_csv())
