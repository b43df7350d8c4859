"""Traffic-light learning agents that exchange advice with their peers."""

from .config import ExperimentConfig, default_config, load_config
from .harness import RunTrace, read_trace, run_experiment, run_standalone, write_outputs

__all__ = [
    "ExperimentConfig",
    "RunTrace",
    "default_config",
    "load_config",
    "read_trace",
    "run_experiment",
    "run_standalone",
    "write_outputs",
]
