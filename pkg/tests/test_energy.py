import pytest

from predrt import eventlog as el
from predrt.energy import (EnergyConfig, MalformedLogError, compute_edp, report_csv,
                           state_intervals)
from predrt.engine import run_virtual
from predrt.bench import BenchmarkSpec, generate


def test_one_active_cpu():
    log = el.EventLog(1)
    log.add(0.0, el.START, 0, 0, 0)
    log.add(10.0, el.END, 0, 0, 0)
    r = compute_edp(log, EnergyConfig(p_active=1.0))
    assert (r.makespan_us, r.energy, r.edp) == (10.0, 10.0, 100.0)


def test_active_plus_parked():
    log = el.EventLog(2)
    log.add(0.0, el.PARK, 1, 1)
    log.add(0.0, el.START, 0, 0, 0)
    log.add(10.0, el.END, 0, 0, 0)
    r = compute_edp(log, EnergyConfig(p_idle=0.1))
    assert r.energy == pytest.approx(11.0)
    assert r.edp == pytest.approx(110.0)


def test_lent_billed_idle():
    log = el.EventLog(2, initial="OL")
    log.add(0.0, el.START, 0, 0, 0)
    log.add(10.0, el.END, 0, 0, 0)
    assert compute_edp(log).energy == pytest.approx(11.0)


def test_identical_logs_identical_reports():
    wl = generate(BenchmarkSpec("cholesky_dag", "fine", {"tiles": 5}), 0)
    a = run_virtual(wl, "idle", n_cpus=4)
    b = run_virtual(wl, "idle", n_cpus=4)
    assert compute_edp(a.log) == compute_edp(b.log)


def test_scaling_power_constants():
    wl = generate(BenchmarkSpec("stream_like", "coarse", {"waves": 4}), 0)
    cfg = EnergyConfig()
    reports = {p: compute_edp(run_virtual(wl, p, n_cpus=8).log) for p in
               ("busy", "idle", "prediction")}
    scaled = {p: compute_edp(run_virtual(wl, p, n_cpus=8).log, cfg.scaled(3.0))
              for p in reports}
    for p in reports:
        assert scaled[p].energy == pytest.approx(3 * reports[p].energy)
        assert scaled[p].edp == pytest.approx(3 * reports[p].edp)
    rank = sorted(reports, key=lambda p: reports[p].edp)
    assert rank == sorted(scaled, key=lambda p: scaled[p].edp)


def test_config_validation():
    with pytest.raises(ValueError):
        EnergyConfig(p_idle=1.0, p_spin=1.0)
    with pytest.raises(ValueError):
        EnergyConfig(p_active=-1.0)


def test_malformed_log_rejected():
    log = el.EventLog(1)
    log.add(0.0, el.END, 0, 0, 0)
    with pytest.raises(MalformedLogError):
        compute_edp(log)
    log = el.EventLog(1)
    log.add(0.0, el.PARK, 0, 0)
    log.add(1.0, el.START, 0, 0, 0)
    with pytest.raises(MalformedLogError):
        state_intervals(log, 2.0)
    log = el.EventLog(1)
    log.add(0.0, el.START, 3, 3, 0)
    with pytest.raises(MalformedLogError):
        compute_edp(log)


def test_csv_schema():
    log = el.EventLog(1, policy="busy")
    log.add(0.0, el.START, 0, 0, 0)
    log.add(2.0, el.END, 0, 0, 0)
    text = report_csv([compute_edp(log, run_id="r0")])
    assert text == "run_id,policy,makespan_us,energy,edp\nr0,busy,2.000,2,4\n"


def test_prediction_beats_busy_on_two_phase():
    wl = generate(BenchmarkSpec("two_phase_fig1"), 0)
    busy = run_virtual(wl, "busy", n_cpus=8)
    pred = run_virtual(wl, "prediction", n_cpus=8)
    eb = compute_edp(busy.log)
    ep = compute_edp(pred.log)
    assert ep.edp <= eb.edp
    assert ep.active_time_us <= eb.active_time_us
