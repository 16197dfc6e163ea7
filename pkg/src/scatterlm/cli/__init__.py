"""Command-line front end and run configuration."""

from .config import ConfigError, RunConfig, apply_overrides, load_config, packaged_config
from .main import STUDIES, build_parser, cmd_bench, cmd_fit, cmd_simulate, cmd_train, main, write_manifest

__all__ = [
    "ConfigError", "RunConfig", "STUDIES", "apply_overrides", "build_parser", "cmd_bench", "cmd_fit",
    "cmd_simulate", "cmd_train", "load_config", "main", "packaged_config", "write_manifest",
]
