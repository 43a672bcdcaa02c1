"""Config-driven experiment orchestration."""

from .config import ExperimentConfig, load_config, validate_config
from .runner import run_experiment

__all__ = ["ExperimentConfig", "load_config", "validate_config", "run_experiment"]
