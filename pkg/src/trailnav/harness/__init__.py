"""Scenarios, closed-loop trials, metrics, reports and the command line."""

from .pipeline import METHODS, Environment, RunMetrics, TrialResult, plan_trail, run_trial
from .report import aggregate, export_plot_data, plot_data
from .scenario import BUILTIN, ScenarioConfig, load_scenario, parse_scenario
from .suite import SuiteConfig, load_suite_config, run_suite, run_suite_config

__all__ = ["BUILTIN", "METHODS", "Environment", "RunMetrics", "ScenarioConfig", "SuiteConfig", "TrialResult",
           "aggregate", "export_plot_data", "load_scenario", "load_suite_config", "parse_scenario", "plan_trail",
           "plot_data", "run_suite", "run_suite_config", "run_trial"]
