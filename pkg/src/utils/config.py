"""
Configuration management for Proj-BNN.

This module provides the run configuration system:
- YAML configuration files
- Environment variable overrides (PROJBNN_*)
- Dataclass-based type-safe sections with validation
- A scale factor for shrinking every iteration/sample budget at once
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, get_type_hints

import yaml


# Default paths
ROOT_DIR = Path(__file__).parent.parent.parent
CONFIG_DIR = ROOT_DIR / "config"
DEFAULT_CONFIG_PATH = CONFIG_DIR / "config.yaml"
EXAMPLE_CONFIG_PATH = CONFIG_DIR / "config.example.yaml"

METHODS = ("projbnn", "bbb", "linear", "one_stage", "qz_only", "fge", "meta")


class ConfigError(ValueError):
    """Raised for unknown keys, invalid values or unreadable config files."""


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


@dataclass
class GeneralConfig:
    """General run settings."""

    log_level: str = "INFO"
    output_directory: str = "output"

    @property
    def output_path(self) -> Path:
        """Get output directory as Path object (relative to the cwd)."""
        return Path(self.output_directory)


@dataclass
class DataConfig:
    """Dataset source and split settings."""

    source: str = "toy-rbf"
    path: Optional[str] = None
    n_points: int = 200
    split: str = "random"
    train_fraction: float = 0.8
    valid_fraction: float = 0.1
    test_fraction: float = 0.1
    normalize: bool = True

    def __post_init__(self):
        total = self.train_fraction + self.valid_fraction + self.test_fraction
        _require(
            abs(total - 1.0) < 1e-9,
            f"data split fractions must sum to 1 (got {total})",
        )
        _require(
            self.split in ("random", "extrapolation", "interpolation"),
            f"unknown split kind '{self.split}'",
        )
        _require(self.n_points >= 1, "data.n_points must be >= 1")


@dataclass
class NetworkConfig:
    """Target network. Input/output widths are taken from the data."""

    hidden: List[int] = field(default_factory=lambda: [50])
    activation: str = "relu"
    rbf_center: float = 0.0
    rbf_lengthscale: float = 1.0

    def __post_init__(self):
        _require(len(self.hidden) >= 1, "network.hidden needs at least one layer")
        _require(all(h > 0 for h in self.hidden), "network.hidden must be positive")
        _require(
            self.activation in ("relu", "rbf", "tanh"),
            f"unknown activation '{self.activation}'",
        )


@dataclass
class ObservationConfig:
    """Gaussian observation noise (normalized units)."""

    sigma_y: float = 0.1

    def __post_init__(self):
        _require(self.sigma_y > 0, "observation.sigma_y must be > 0")


@dataclass
class PriorConfig:
    """Isotropic Gaussian prior shared by w, z and phi."""

    mean: float = 0.0
    variance: float = 0.1

    def __post_init__(self):
        _require(self.variance > 0, "prior.variance must be > 0")


@dataclass
class FgeConfig:
    """Stage 1: MAP fit followed by cyclic-learning-rate snapshot harvesting."""

    map_lr: float = 0.001
    map_iterations: int = 5000
    map_optimizer: str = "adam"
    cycle_optimizer: str = "sgd"
    lr_max: float = 0.01
    lr_min: float = 0.0001
    cycle_epochs: int = 10
    snapshots: int = 500
    keep_top_k: int = 150
    batch_size: int = 128
    init_std: float = 0.1
    fit_mode_subsets: bool = False
    seed: int = 0

    def __post_init__(self):
        _require(self.lr_max > self.lr_min > 0, "fge: need lr_max > lr_min > 0")
        _require(self.snapshots >= 1, "fge.snapshots must be >= 1")
        _require(
            1 <= self.keep_top_k <= self.snapshots,
            "fge: need 1 <= keep_top_k <= snapshots",
        )
        _require(self.cycle_epochs >= 1, "fge.cycle_epochs must be >= 1")
        _require(self.batch_size >= 1, "fge.batch_size must be >= 1")
        _require(self.map_iterations >= 0, "fge.map_iterations must be >= 0")


@dataclass
class PcaeConfig:
    """Stage 2: prediction-constrained autoencoder."""

    latent_dim: int = 2
    hidden: List[int] = field(default_factory=lambda: [20])
    activation: str = "rbf"
    beta: float = 1.0
    input_noise_std: float = 1.0
    lr: float = 0.01
    iterations: int = 5000
    batch_over_snapshots: int = 32
    data_batch_size: Optional[int] = None
    init_std: float = 0.1
    seed: int = 0

    def __post_init__(self):
        _require(self.latent_dim >= 1, "pcae.latent_dim must be >= 1")
        _require(self.beta >= 0, "pcae.beta must be >= 0")
        _require(self.input_noise_std >= 0, "pcae.input_noise_std must be >= 0")
        _require(self.iterations >= 0, "pcae.iterations must be >= 0")
        _require(self.batch_over_snapshots >= 1, "pcae.batch_over_snapshots >= 1")
        _require(
            self.activation in ("relu", "rbf", "tanh"),
            f"unknown activation '{self.activation}'",
        )


@dataclass
class VarInferenceConfig:
    """Stage 3 (and the BbB baseline): mean-field black-box VI."""

    mc_samples: int = 20
    lr: float = 0.01
    max_iterations: int = 50000
    early_stop_patience: int = 30
    check_every: int = 100
    eval_samples: int = 20
    batch_size: int = 128
    phi_logstd_init_mean: float = -9.0
    phi_logstd_init_std: float = 0.1
    mean_init_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        _require(self.mc_samples >= 1, "vi.mc_samples must be >= 1")
        _require(self.lr > 0, "vi.lr must be > 0")
        _require(self.max_iterations >= 0, "vi.max_iterations must be >= 0")
        _require(self.early_stop_patience >= 1, "vi.early_stop_patience >= 1")
        _require(self.check_every >= 1, "vi.check_every must be >= 1")
        _require(self.eval_samples >= 1, "vi.eval_samples must be >= 1")


@dataclass
class MetaConfig:
    """Multitask sine experiment."""

    n_tasks: int = 8
    points_per_task: int = 40
    valid_fraction: float = 0.2
    latent_dim: int = 2
    decoder_hidden: List[int] = field(default_factory=lambda: [50])
    decoder_activation: str = "tanh"
    target_hidden: List[int] = field(default_factory=lambda: [20])
    target_activation: str = "tanh"
    grid_n: int = 5
    phi_draws: int = 20
    x_grid_points: int = 100

    def __post_init__(self):
        _require(self.n_tasks >= 1, "meta.n_tasks must be >= 1")
        _require(self.points_per_task >= 2, "meta.points_per_task must be >= 2")
        _require(0 < self.valid_fraction < 1, "meta.valid_fraction in (0, 1)")
        _require(self.grid_n >= 2, "meta.grid_n must be >= 2")


@dataclass
class GridConfig:
    """Hyperparameter grid searched by the pipeline."""

    latent_dims: List[int] = field(default_factory=lambda: [2, 10, 50, 100])
    learning_rates: List[float] = field(
        default_factory=lambda: [0.1, 0.01, 0.001, 0.0001]
    )
    hidden_layouts: List[List[int]] = field(default_factory=lambda: [[20]])
    jobs: int = 1

    def __post_init__(self):
        _require(len(self.latent_dims) >= 1, "grid.latent_dims must not be empty")
        _require(len(self.learning_rates) >= 1, "grid.learning_rates must not be empty")
        _require(len(self.hidden_layouts) >= 1, "grid.hidden_layouts must not be empty")
        _require(self.jobs >= 1, "grid.jobs must be >= 1")


@dataclass
class EvalConfig:
    """Evaluation settings."""

    samples: int = 500
    quantiles: List[float] = field(default_factory=lambda: [0.025, 0.975])
    band_points: int = 200
    fit_threshold_sigmas: float = 3.0

    def __post_init__(self):
        _require(self.samples >= 1, "eval.samples must be >= 1")
        _require(
            all(0 <= q <= 1 for q in self.quantiles), "eval.quantiles must be in [0, 1]"
        )


@dataclass
class LoggingConfig:
    """Configuration for logging."""

    to_file: bool = False
    directory: str = "output/logs"
    filename_pattern: str = "projbnn_{date}.log"
    max_file_size_mb: int = 10
    backup_count: int = 5
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    @property
    def path(self) -> Path:
        """Get log directory as Path object."""
        return Path(self.directory)


@dataclass
class CLIConfig:
    """Configuration for CLI."""

    colored_output: bool = True


@dataclass
class RunConfig:
    """Main configuration class."""

    method: str = "projbnn"
    seed: int = 0
    scale: float = 1.0

    general: GeneralConfig = field(default_factory=GeneralConfig)
    data: DataConfig = field(default_factory=DataConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    observation: ObservationConfig = field(default_factory=ObservationConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    fge: FgeConfig = field(default_factory=FgeConfig)
    pcae: PcaeConfig = field(default_factory=PcaeConfig)
    vi: VarInferenceConfig = field(default_factory=VarInferenceConfig)
    meta: MetaConfig = field(default_factory=MetaConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)
    cli: CLIConfig = field(default_factory=CLIConfig)

    def __post_init__(self):
        _require(self.method in METHODS, f"unknown method '{self.method}'")
        _require(0 < self.scale <= 1, "scale must be in (0, 1]")

    @property
    def log_level(self) -> str:
        return self.general.log_level

    def to_dict(self) -> Dict[str, Any]:
        """Plain-dict form (embedded in artifacts)."""
        return dataclasses.asdict(self)


def scaled(config: RunConfig, factor: float) -> RunConfig:
    """
    Shrink every iteration/sample budget by ``factor``.

    Counts are rounded up and kept >= 1; keep_top_k never exceeds the
    scaled snapshot count. Factors compose: the resulting ``scale`` is the
    product of the previous scale and ``factor``.
    """
    try:
        in_range = 0 < factor <= 1
    except TypeError as e:
        raise ConfigError(f"scale must be a number, got {factor!r}") from e
    _require(in_range, f"scale must be in (0, 1], got {factor}")
    if factor == 1:
        return config

    def shrink(n: int) -> int:
        return max(1, int(math.ceil(n * factor)))

    snapshots = shrink(config.fge.snapshots)
    fge = dataclasses.replace(
        config.fge,
        snapshots=snapshots,
        keep_top_k=min(shrink(config.fge.keep_top_k), snapshots),
        map_iterations=shrink(config.fge.map_iterations),
    )
    pcae = dataclasses.replace(config.pcae, iterations=shrink(config.pcae.iterations))
    vi = dataclasses.replace(
        config.vi, max_iterations=shrink(config.vi.max_iterations)
    )
    return dataclasses.replace(
        config, fge=fge, pcae=pcae, vi=vi, scale=config.scale * factor
    )


def with_overrides(
    config: RunConfig,
    *,
    seed: Optional[int] = None,
    scale: Optional[float] = None,
    method: Optional[str] = None,
    output_directory: Optional[str | Path] = None,
    latent_dim: Optional[int] = None,
    lr: Optional[float] = None,
    samples: Optional[int] = None,
) -> RunConfig:
    """
    Apply command-line overrides.

    ``latent_dim`` and ``lr`` collapse the search grid to a single value.
    """
    changes: Dict[str, Any] = {}
    if seed is not None:
        changes["seed"] = seed
    if method is not None:
        changes["method"] = method
    if output_directory is not None:
        changes["general"] = dataclasses.replace(
            config.general, output_directory=str(output_directory)
        )
    if latent_dim is not None:
        changes["grid"] = dataclasses.replace(
            changes.get("grid", config.grid), latent_dims=[latent_dim]
        )
        changes["pcae"] = dataclasses.replace(config.pcae, latent_dim=latent_dim)
    if lr is not None:
        changes["grid"] = dataclasses.replace(
            changes.get("grid", config.grid), learning_rates=[lr]
        )
    if samples is not None:
        changes["eval"] = dataclasses.replace(config.eval, samples=samples)
    config = dataclasses.replace(config, **changes) if changes else config
    return scaled(config, scale) if scale is not None else config


class ConfigLoader:
    """
    Configuration loader with support for YAML files and environment variables.

    Priority (highest to lowest):
    1. Environment variables (PROJBNN_*)
    2. User config file (config.yaml)
    3. Default values

    Unknown keys anywhere in the file raise ConfigError.

    Example:
        >>> config = ConfigLoader.load()
        >>> config = ConfigLoader.load("experiments/toy.yaml")
    """

    ENV_PREFIX = "PROJBNN_"

    @classmethod
    def load(cls, config_path: Optional[str | Path] = None) -> RunConfig:
        """
        Load configuration from file and environment.

        Args:
            config_path: Optional path to configuration file.
                        If None, tries default locations.

        Returns:
            RunConfig: Loaded configuration object.
        """
        if config_path:
            path = Path(config_path)
            if not path.exists():
                raise ConfigError(f"Config file not found: {path}")
        elif DEFAULT_CONFIG_PATH.exists():
            path = DEFAULT_CONFIG_PATH
        elif EXAMPLE_CONFIG_PATH.exists():
            path = EXAMPLE_CONFIG_PATH
        else:
            return cls._apply_env_overrides(RunConfig())

        data = cls._load_yaml(path)
        config = cls._build_config(data)
        return cls._apply_env_overrides(config)

    @classmethod
    def _load_yaml(cls, path: Path) -> Dict[str, Any]:
        """Load YAML configuration file."""
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"Invalid YAML configuration: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config root must be a mapping: {path}")
        return data

    @classmethod
    def _build_config(cls, data: Dict[str, Any]) -> RunConfig:
        """Build RunConfig object from dictionary data."""
        data = dict(data)
        scale = data.pop("scale", 1.0)
        try:
            config = cls._build_section(RunConfig, data, "")
        except TypeError as e:
            raise ConfigError(f"Invalid configuration value: {e}") from e
        return scaled(config, scale)

    @classmethod
    def _build_section(cls, section_type: type, data: Any, prefix: str) -> Any:
        """Recursively build a dataclass section, rejecting unknown keys."""
        if not isinstance(data, dict):
            raise ConfigError(f"Section '{prefix or 'root'}' must be a mapping")

        hints = get_type_hints(section_type)
        known = {f.name for f in dataclasses.fields(section_type)}
        kwargs: Dict[str, Any] = {}
        for key, value in data.items():
            dotted = f"{prefix}.{key}" if prefix else str(key)
            if key not in known:
                raise ConfigError(f"Unknown configuration key '{dotted}'")
            field_type = hints[key]
            if dataclasses.is_dataclass(field_type):
                kwargs[key] = cls._build_section(field_type, value or {}, dotted)
            else:
                kwargs[key] = value
        return section_type(**kwargs)

    @classmethod
    def _apply_env_overrides(cls, config: RunConfig) -> RunConfig:
        """Apply environment variable overrides."""
        if level := os.environ.get(f"{cls.ENV_PREFIX}LOG_LEVEL"):
            config.general.log_level = level

        if out := os.environ.get(f"{cls.ENV_PREFIX}OUTPUT_DIR"):
            config.general.output_directory = out

        if seed := os.environ.get(f"{cls.ENV_PREFIX}SEED"):
            try:
                config.seed = int(seed)
            except ValueError as e:
                raise ConfigError(f"{cls.ENV_PREFIX}SEED must be an integer") from e

        if scale := os.environ.get(f"{cls.ENV_PREFIX}SCALE"):
            try:
                factor = float(scale)
            except ValueError as e:
                raise ConfigError(f"{cls.ENV_PREFIX}SCALE must be a number") from e
            config = scaled(config, factor)

        return config


# Global config instance
_config: Optional[RunConfig] = None


@dataclass(frozen=True)
class ConfigView:
    """Read-only proxy over RunConfig (not a snapshot); blocks attribute reassignment."""

    _config: RunConfig

    @property
    def method(self) -> str:
        return self._config.method

    @property
    def seed(self) -> int:
        return self._config.seed

    @property
    def scale(self) -> float:
        return self._config.scale

    @property
    def log_level(self) -> str:
        return self._config.general.log_level

    @property
    def general(self) -> GeneralConfig:
        return self._config.general

    @property
    def data(self) -> DataConfig:
        return self._config.data

    @property
    def network(self) -> NetworkConfig:
        return self._config.network

    @property
    def observation(self) -> ObservationConfig:
        return self._config.observation

    @property
    def prior(self) -> PriorConfig:
        return self._config.prior

    @property
    def fge(self) -> FgeConfig:
        return self._config.fge

    @property
    def pcae(self) -> PcaeConfig:
        return self._config.pcae

    @property
    def vi(self) -> VarInferenceConfig:
        return self._config.vi

    @property
    def meta(self) -> MetaConfig:
        return self._config.meta

    @property
    def grid(self) -> GridConfig:
        return self._config.grid

    @property
    def eval(self) -> EvalConfig:
        return self._config.eval

    @property
    def logging(self) -> LoggingConfig:
        return self._config.logging

    @property
    def cli(self) -> CLIConfig:
        return self._config.cli


def get_config() -> RunConfig:
    """
    Get the global configuration instance.

    Returns:
        RunConfig: The global configuration object.
    """
    global _config
    if _config is None:
        _config = ConfigLoader.load()
    return _config


def get_config_view() -> ConfigView:
    """Get a read-only view of the global configuration."""
    return ConfigView(get_config())


def reload_config(config_path: Optional[str | Path] = None) -> RunConfig:
    """
    Reload configuration from file.

    Args:
        config_path: Optional path to configuration file.

    Returns:
        RunConfig: The reloaded configuration object.
    """
    global _config
    _config = ConfigLoader.load(config_path)
    return _config
