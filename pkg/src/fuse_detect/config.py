"""Pipeline configuration: flat key-value file with sections.

Unknown sections or keys are rejected so a stale config cannot silently
drift from the feature setup recorded in a checkpoint. All values have
documented defaults except the paths a given command actually needs.

Example file::

    [paths]
    manifest = data/manifest.jsonl
    output_dir = out

    [encoder]
    backend = stub
    stub_seed = 7

    [spectral]
    reduction_mode = axis_profiles

    [degradation]
    apply_probability = 0.5
    blur_sigma_min = 0.5
    blur_sigma_max = 3.0
    jpeg_quality_min = 40
    jpeg_quality_max = 95

    [training]
    stage1_epochs = 4
    stage2_epochs = 3
    batch_size = 64
    replay_fraction = 0.05
    learning_rate = 0.0001
    seed = 1729
    workers = 0
    feature_cache = false
"""
import configparser
import os
from dataclasses import dataclass, field

from fuse_detect.errors import ConfigError
from fuse_detect.preprocess import DegradationConfig
from fuse_detect.semantic import EncoderConfig
from fuse_detect.spectral import REDUCTION_MODES

DEFAULT_SEED = 1729

_SCHEMA = {
    "paths": {"manifest": str, "output_dir": str, "checkpoint": str},
    "encoder": {"backend": str, "model_path": str, "stub_seed": int},
    "spectral": {"reduction_mode": str},
    "degradation": {
        "apply_probability": float,
        "blur_sigma_min": float,
        "blur_sigma_max": float,
        "jpeg_quality_min": int,
        "jpeg_quality_max": int,
    },
    "training": {
        "stage1_epochs": int,
        "stage2_epochs": int,
        "batch_size": int,
        "replay_fraction": float,
        "learning_rate": float,
        "seed": int,
        "workers": int,
        "feature_cache": bool,
    },
}


@dataclass
class PipelineConfig:
    manifest: str | None = None
    output_dir: str = "out"
    checkpoint: str | None = None
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    reduction_mode: str = "axis_profiles"
    degradation: DegradationConfig = field(default_factory=DegradationConfig)
    stage1_epochs: int = 4
    stage2_epochs: int = 3
    batch_size: int = 64
    replay_fraction: float = 0.05
    learning_rate: float = 1e-4
    seed: int = DEFAULT_SEED
    workers: int = 0
    feature_cache: bool = False

    def feature_config(self) -> dict:
        """Feature-extraction identity covered by the checkpoint hash.

        Covers the reduction mode, degradation parameters, and encoder
        identity; run seeds are state, not configuration, and are excluded.
        """
        return {
            "reduction_mode": self.reduction_mode,
            "degradation": {
                "apply_probability": self.degradation.apply_probability,
                "blur_sigma_min": self.degradation.blur_sigma_min,
                "blur_sigma_max": self.degradation.blur_sigma_max,
                "jpeg_quality_min": self.degradation.jpeg_quality_min,
                "jpeg_quality_max": self.degradation.jpeg_quality_max,
            },
            "encoder": self.encoder.identity(),
        }


def _convert(section: str, key: str, raw: str, typ):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc


def load_config(path: str) -> PipelineConfig:
    """Parse and validate a config file; unknown keys are errors."""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc

    values: dict[str, dict] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            values[section][key] = _convert(section, key, raw, _SCHEMA[section][key])

    cfg = PipelineConfig()
    paths = values.get("paths", {})
    cfg.manifest = paths.get("manifest", cfg.manifest)
    cfg.output_dir = paths.get("output_dir", cfg.output_dir)
    cfg.checkpoint = paths.get("checkpoint", cfg.checkpoint)

    enc = values.get("encoder", {})
    backend = enc.get("backend", "stub")
    if backend not in ("stub", "graph_runtime"):
        raise ConfigError(f"[encoder] backend must be stub or graph_runtime (got {backend!r})")
    cfg.encoder = EncoderConfig(
        backend=backend,
        model_path=enc.get("model_path"),
        stub_seed=enc.get("stub_seed", 0),
    )

    spec = values.get("spectral", {})
    cfg.reduction_mode = spec.get("reduction_mode", cfg.reduction_mode)
    if cfg.reduction_mode not in REDUCTION_MODES:
        raise ConfigError(
            f"[spectral] reduction_mode must be one of {REDUCTION_MODES} "
            f"(got {cfg.reduction_mode!r})"
        )

    deg = values.get("degradation", {})
    try:
        cfg.degradation = DegradationConfig(
            apply_probability=deg.get("apply_probability", 0.5),
            blur_sigma_min=deg.get("blur_sigma_min", 0.5),
            blur_sigma_max=deg.get("blur_sigma_max", 3.0),
            jpeg_quality_min=deg.get("jpeg_quality_min", 40),
            jpeg_quality_max=deg.get("jpeg_quality_max", 95),
        )
    except ConfigError as exc:
        raise ConfigError(f"[degradation] {exc}") from exc

    tr = values.get("training", {})
    cfg.stage1_epochs = tr.get("stage1_epochs", cfg.stage1_epochs)
    cfg.stage2_epochs = tr.get("stage2_epochs", cfg.stage2_epochs)
    cfg.batch_size = tr.get("batch_size", cfg.batch_size)
    cfg.replay_fraction = tr.get("replay_fraction", cfg.replay_fraction)
    cfg.learning_rate = tr.get("learning_rate", cfg.learning_rate)
    cfg.seed = tr.get("seed", cfg.seed)
    cfg.workers = tr.get("workers", cfg.workers)
    cfg.feature_cache = tr.get("feature_cache", cfg.feature_cache)

    if not 0.0 < cfg.replay_fraction <= 1.0:
        raise ConfigError("[training] replay_fraction must be in (0, 1]")
    if cfg.stage1_epochs < 1 or cfg.stage2_epochs < 1:
        raise ConfigError("[training] epoch counts must be >= 1")
    if cfg.batch_size < 1:
        raise ConfigError("[training] batch_size must be >= 1")
    if cfg.learning_rate <= 0:
        raise ConfigError("[training] learning_rate must be > 0")
    if cfg.workers < 0:
        raise ConfigError("[training] workers must be >= 0")
    return cfg


def apply_env_overrides(cfg: PipelineConfig) -> PipelineConfig:
    """FUSE_MODEL_PATH overrides the encoder model path."""
    model_path = os.environ.get("FUSE_MODEL_PATH")
    if model_path:
        cfg.encoder = EncoderConfig(
            backend=cfg.encoder.backend,
            model_path=model_path,
            stub_seed=cfg.encoder.stub_seed,
        )
    return cfg
