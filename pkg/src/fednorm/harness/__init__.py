from .config import ExperimentConfig, dump_config, load_config, log_rounds, parse_config, sweep_points
from .plot import emit_plot
from .runner import COLUMNS, run_experiment

__all__ = [
    "COLUMNS", "ExperimentConfig", "dump_config", "emit_plot", "load_config",
    "log_rounds", "parse_config", "run_experiment", "sweep_points",
]
