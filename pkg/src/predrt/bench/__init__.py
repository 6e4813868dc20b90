"""Benchmark generators and the suite runner."""
from .generators import KINDS, BenchmarkSpec, SpecError, generate, sharing_pair
from .harness import ConfigError, RunConfig, load_config, run_suite, write_results

__all__ = ["KINDS", "BenchmarkSpec", "ConfigError", "RunConfig", "SpecError", "generate",
           "load_config", "run_suite", "sharing_pair", "write_results"]
