from .config import ConfigError, ExperimentConfig, list_presets, load_config, load_preset
from .runner import run_experiment

__all__ = ["ConfigError", "ExperimentConfig", "list_presets", "load_config", "load_preset", "run_experiment"]
