"""Task runtime model with workload-driven CPU management.

The runtime monitors per-type task timings, predicts how many CPUs the
live workload needs over the next period and parks, resumes, lends or
acquires worker threads accordingly.  Two backends run the same policies:
a deterministic discrete-event one (:func:`run_virtual`) and real threads
(:func:`run_threaded`).
"""
from .cpu_manager import CpuManager, Policy
from .energy import EnergyConfig, compute_edp
from .engine import EngineCosts, run_shared_virtual, run_virtual
from .eventlog import EventLog
from .monitoring import Monitor, accuracy
from .predictor import Predictor, PredictorConfig, get_cpu_prediction
from .sharing import Arbiter, SharingPolicy
from .tasks import TaskGraph
from .threaded import run_threaded
from .validate import validate_run
from .workload import Workload

__all__ = [
    "Arbiter", "CpuManager", "EngineCosts", "EnergyConfig", "EventLog", "Monitor",
    "Policy", "Predictor", "PredictorConfig", "SharingPolicy", "TaskGraph", "Workload",
    "accuracy", "compute_edp", "get_cpu_prediction", "run_shared_virtual",
    "run_threaded", "run_virtual", "validate_run",
]
