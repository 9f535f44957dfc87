"""
Utility modules for Proj-BNN.

This package provides common utilities:
- config: Configuration management
- logging: Logging utilities
- seeding: Per-stage random streams derived from the run seed
"""

from .config import (
    ConfigError,
    ConfigLoader,
    ConfigView,
    RunConfig,
    get_config,
    get_config_view,
    reload_config,
    scaled,
    with_overrides,
)
from .logging import (
    setup_logging,
    get_logger,
)
from .seeding import (
    stage_rng,
    stage_seed,
    split_streams,
)

__all__ = [
    # Config
    "ConfigError",
    "ConfigLoader",
    "ConfigView",
    "RunConfig",
    "get_config",
    "get_config_view",
    "reload_config",
    "scaled",
    "with_overrides",
    # Logging
    "setup_logging",
    "get_logger",
    # Seeding
    "stage_rng",
    "stage_seed",
    "split_streams",
]
