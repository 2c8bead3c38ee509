"""Agent-based commuter mode choice with a fare-free transit policy switch."""

from .config import MODES, ConfigError, ScenarioConfig, load_config
from .engine import compare_scenarios, run_experiment, run_paired, run_replication
from .metrics import write_results

__all__ = [
    "MODES", "ConfigError", "ScenarioConfig", "load_config",
    "run_replication", "run_experiment", "run_paired", "compare_scenarios",
    "write_results",
]
__version__ = "0.1.0"
