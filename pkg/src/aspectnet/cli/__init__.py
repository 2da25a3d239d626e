"""Command-line pipeline."""

from .config import ConfigError, RunConfig
from .main import main, run_stage
from .manifest import Manifest, MissingPredecessor, PipelineError, StaleConfig

__all__ = ["ConfigError", "Manifest", "MissingPredecessor", "PipelineError", "RunConfig", "StaleConfig", "main",
           "run_stage"]
