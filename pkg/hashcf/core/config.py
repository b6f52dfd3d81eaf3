from dataclasses import dataclass, field, asdict, fields
from typing import List, Optional, Dict, Any
import json
import yaml

from .errors import ConfigurationError
from .utils import sha256_text

DISSIMILARITIES = ("phd", "hamming")
SAMPLING_MODES = ("stochastic", "deterministic")
MODEL_KINDS = ("vh-phd", "vh-hamming", "mf", "mf-mean", "mf-median")
DATASET_FORMATS = ("movielens-dat", "csv")
DTYPES = ("float32", "float64")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class _ConfigMixin:
    """Shared YAML/JSON loading and keyword updates for the config dataclasses."""

    @classmethod
    def from_yaml(cls, file_path: str):
        """
        Load configuration from a YAML or JSON file.

        Args:
            file_path (str): Path to the configuration file. JSON is valid YAML.

        Returns:
            An instance of the config class.
        """
        with open(file_path, 'r') as file:
            config_dict = yaml.safe_load(file) or {}
        if not isinstance(config_dict, dict):
            raise ConfigurationError(f"{file_path}: top level must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(config_dict) - known)
        if unknown:
            raise ConfigurationError(f"{cls.__name__} has no field(s): {', '.join(unknown)}")
        return cls(**config_dict)

    def to_yaml(self, file_path: str):
        with open(file_path, 'w') as file:
            yaml.safe_dump(self.to_dict(), file, sort_keys=True)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def update(self, **kwargs):
        """
        Update configuration with new values and re-validate.

        Raises:
            ConfigurationError: If a key is not a field of the config.
        """
        for key, value in kwargs.items():
            if hasattr(self, key):
                setattr(self, key, value)
            else:
                raise ConfigurationError(f"{type(self).__name__} has no attribute '{key}'")
        self.validate()

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form; embedded in every artifact."""
        return sha256_text(json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")))

    def __post_init__(self):
        self.validate()


@dataclass
class TrainConfig(_ConfigMixin):
    bits: int = 32
    learning_rate: float = 0.001
    batch_size: int = 400
    epochs: int = 100
    kl_weight: float = 0.1
    kl_warmup_fraction: float = 0.2
    dissimilarity: str = "phd"
    train_sampling: str = "stochastic"
    eval_sampling: str = "deterministic"
    noise_variance: float = 1.0
    noise_decay: float = 1.0 - 1e-4
    clamp: float = 10.0
    init_std: float = 0.1
    patience: Optional[int] = 10
    eval_k: int = 10
    seed: int = 0
    dtype: str = "float32"

    def validate(self):
        """
        Validate the training settings.

        Raises:
            ConfigurationError: If any setting is invalid.
        """
        if not 8 <= self.bits <= 512:
            raise ConfigurationError("bits must be between 8 and 512")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be at least 1")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be at least 1")
        if self.kl_weight < 0:
            raise ConfigurationError("kl_weight must be non-negative")
        if not 0 <= self.kl_warmup_fraction <= 1:
            raise ConfigurationError("kl_warmup_fraction must be in [0, 1]")
        if self.dissimilarity not in DISSIMILARITIES:
            raise ConfigurationError(f"dissimilarity must be one of {DISSIMILARITIES}")
        if self.train_sampling not in SAMPLING_MODES or self.eval_sampling not in SAMPLING_MODES:
            raise ConfigurationError(f"sampling modes must be one of {SAMPLING_MODES}")
        if self.noise_variance < 0:
            raise ConfigurationError("noise_variance must be non-negative")
        if not 0 < self.noise_decay <= 1:
            raise ConfigurationError("noise_decay must be in (0, 1]")
        if self.clamp <= 0:
            raise ConfigurationError("clamp must be positive")
        if self.init_std < 0:
            raise ConfigurationError("init_std must be non-negative")
        if self.patience is not None and self.patience < 1:
            raise ConfigurationError("patience must be at least 1 (or null to disable)")
        if self.eval_k < 1:
            raise ConfigurationError("eval_k must be at least 1")
        if self.dtype not in DTYPES:
            raise ConfigurationError(f"dtype must be one of {DTYPES}")


@dataclass
class MFConfig(_ConfigMixin):
    dim: int = 32
    learning_rate: float = 0.001
    batch_size: int = 400
    l2: float = 0.001
    epochs: int = 100
    patience: Optional[int] = 10
    use_bias: bool = False
    pooled_thresholds: bool = False
    init_std: float = 0.1
    eval_k: int = 10
    seed: int = 0
    dtype: str = "float32"

    def validate(self):
        if self.dim < 1:
            raise ConfigurationError("dim must be at least 1")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be at least 1")
        if self.l2 < 0:
            raise ConfigurationError("l2 must be non-negative")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be at least 1")
        if self.patience is not None and self.patience < 1:
            raise ConfigurationError("patience must be at least 1 (or null to disable)")
        if self.eval_k < 1:
            raise ConfigurationError("eval_k must be at least 1")
        if self.dtype not in DTYPES:
            raise ConfigurationError(f"dtype must be one of {DTYPES}")


@dataclass
class RunConfig(_ConfigMixin):
    dataset: Optional[str] = None
    format: str = "movielens-dat"
    synthetic: bool = False
    rating_min: float = 1.0
    rating_max: float = 5.0
    min_count: int = 10
    fixpoint_filter: bool = False
    proportions: List[float] = field(default_factory=lambda: [0.425, 0.075, 0.50])
    temporal_split: bool = False
    split_seed: int = 0
    seed: int = 0
    model: str = "vh-phd"
    bits: int = 32
    learning_rate: float = 0.001
    batch_size: int = 400
    epochs: int = 100
    kl_weight: float = 0.1
    kl_warmup_fraction: float = 0.2
    train_sampling: str = "stochastic"
    eval_sampling: str = "deterministic"
    noise_variance: float = 1.0
    noise_decay: float = 1.0 - 1e-4
    patience: Optional[int] = 10
    l2: float = 0.001
    use_bias: bool = False
    pooled_thresholds: bool = False
    ks: List[int] = field(default_factory=lambda: [5, 10])
    full_catalog: bool = False
    curve_window: int = 500
    user: int = 0
    bench_n: int = 10_000_000
    bench_reps: int = 100
    bench_seeds: List[int] = field(default_factory=lambda: [0, 1, 2])
    out: str = "./runs"
    log_level: str = "INFO"

    def validate(self):
        if self.format not in DATASET_FORMATS:
            raise ConfigurationError(f"format must be one of {DATASET_FORMATS}")
        if self.model not in MODEL_KINDS:
            raise ConfigurationError(f"model must be one of {MODEL_KINDS}")
        if self.rating_min >= self.rating_max:
            raise ConfigurationError("rating_min must be below rating_max")
        if self.min_count < 1:
            raise ConfigurationError("min_count must be at least 1")
        if len(self.proportions) != 3 or any(p <= 0 for p in self.proportions):
            raise ConfigurationError("proportions must be three positive fractions")
        if abs(sum(self.proportions) - 1.0) > 1e-9:
            raise ConfigurationError("proportions must sum to 1")
        if not self.ks or any(k < 1 for k in self.ks):
            raise ConfigurationError("ks must be a non-empty list of positive cutoffs")
        if self.curve_window < 1:
            raise ConfigurationError("curve_window must be at least 1")
        if self.bench_n < 1 or self.bench_reps < 1:
            raise ConfigurationError("bench_n and bench_reps must be at least 1")
        if self.log_level not in LOG_LEVELS:
            raise ConfigurationError("Invalid log level")
        # the derived configs carry the remaining range checks
        self.train_config()
        self.mf_config()

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            bits=self.bits,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            kl_weight=self.kl_weight,
            kl_warmup_fraction=self.kl_warmup_fraction,
            dissimilarity="hamming" if self.model == "vh-hamming" else "phd",
            train_sampling=self.train_sampling,
            eval_sampling=self.eval_sampling,
            noise_variance=self.noise_variance,
            noise_decay=self.noise_decay,
            patience=self.patience,
            seed=self.seed,
        )

    def mf_config(self) -> MFConfig:
        return MFConfig(
            dim=self.bits,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            l2=self.l2,
            epochs=self.epochs,
            patience=self.patience,
            use_bias=self.use_bias,
            pooled_thresholds=self.pooled_thresholds,
            seed=self.seed,
        )


def get_default_config() -> RunConfig:
    return RunConfig()


def merge_configs(base_config: RunConfig, override_config: Dict[str, Any]) -> RunConfig:
    """
    Merge a base configuration with overrides; overrides win.

    Args:
        base_config (RunConfig): Base configuration object.
        override_config (Dict[str, Any]): Values to override; None entries are ignored.

    Returns:
        RunConfig: Merged configuration object.
    """
    merged = RunConfig(**base_config.to_dict())
    merged.update(**{k: v for k, v in override_config.items() if v is not None})
    return merged
