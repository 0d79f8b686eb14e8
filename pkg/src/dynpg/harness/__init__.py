"""Verification harness: configuration, suites, reports and the command line."""
from .config import DEFAULT_TOLERANCES, SUITE_ORDER, Config, ConfigError, load_config
from .report import Report, SuiteReport
from .suites import calibrate, run_suite

__all__ = ["Config", "ConfigError", "DEFAULT_TOLERANCES", "Report", "SUITE_ORDER", "SuiteReport", "calibrate",
           "load_config", "run_suite"]
