"""Configuration-driven verification suites, constant estimation and reports."""
from .runner import estimate_constant, load_config, resolve, run_suite
from .suites import SUITES

__all__ = ["SUITES", "estimate_constant", "load_config", "resolve", "run_suite"]
