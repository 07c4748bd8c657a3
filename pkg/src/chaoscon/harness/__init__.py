"""Declarative experiments, report writing and the command line."""

from chaoscon.harness.config import ConfigError, resolve, validate
from chaoscon.harness.experiments import ExperimentResult, run_experiment

__all__ = ["ConfigError", "ExperimentResult", "resolve", "run_experiment", "validate"]
