"""Experiment harness: configs, runs, CSV traces and plots."""
from sega.harness.config import ConfigError, apply_override, load_config, parse_config
from sega.harness.experiments import (RunResult, build_problem, iterate_path, run_experiment,
                                      trajectory_2d)
from sega.harness.plot import PlotError, emit_plot
from sega.trace import Trace, read_csv

__all__ = ["ConfigError", "apply_override", "load_config", "parse_config", "RunResult",
           "build_problem", "iterate_path", "run_experiment", "trajectory_2d", "PlotError",
           "emit_plot", "Trace", "read_csv"]
