import pytest

from predrt import eventlog as el
from predrt.engine import run_virtual
from predrt.bench import BenchmarkSpec, generate


def test_roundtrip():
    wl = generate(BenchmarkSpec("cholesky_dag", params={"tiles": 4}), 0)
    log = run_virtual(wl, "prediction", n_cpus=4).log
    text = log.dumps()
    back = el.EventLog.loads(text)
    assert back.dumps() == text
    assert back.n_cpus == 4 and back.policy == "prediction"


def test_record_format():
    log = el.EventLog(2, ["k"])
    log.add(1.5, el.START, 1, 1, 7, 0)
    log.add(2.0, el.PARK, 0, 0)
    log.add_prediction(3.0, 2, [("k", 1.25)])
    lines = log.dumps().splitlines()
    assert lines[0] == "# runtime=0 policy= n_cpus=2 initial=OO"
    assert lines[1:] == ["1.500,start,1,1,7,k", "2.000,park,0,0,,",
                         "3.000,prediction,,,2,k=1.25"]


def test_bad_lines_rejected():
    with pytest.raises(el.LogFormatError):
        el.EventLog.loads("0.0,start,0,0,0,k\n")
    with pytest.raises(el.LogFormatError):
        el.EventLog.loads("# runtime=0 policy=x n_cpus=1 initial=O\n0.0,jump,0,0,0,k\n")
    with pytest.raises(el.LogFormatError):
        el.EventLog.loads("# runtime=0 policy=x n_cpus=1 initial=O\nabc,start,0,0,0,k\n")
