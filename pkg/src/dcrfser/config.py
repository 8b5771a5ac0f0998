"""TOML run configuration mapped onto the component dataclasses.

Sections: ``[model]``, ``[train]``, ``[augment]``, ``[dsp]``, ``[trim]``,
``[pca]`` and ``[split]``. Missing keys take the dataclass defaults;
unknown sections or keys are rejected.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .augment import AugmentationPlan
from .features import DSPConfig
from .harness.experiment import PCAConfig, SplitConfig
from .harness.pipeline import TrimConfig
from .harness.training import TrainConfig
from .model.network import ModelConfig


class ConfigError(ValueError):
    pass


SECTIONS = {"model": ModelConfig, "train": TrainConfig, "augment": AugmentationPlan,
            "dsp": DSPConfig, "trim": TrimConfig, "pca": PCAConfig, "split": SplitConfig}


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    augment: AugmentationPlan = field(default_factory=AugmentationPlan)
    dsp: DSPConfig = field(default_factory=DSPConfig)
    trim: TrimConfig = field(default_factory=TrimConfig)
    pca: PCAConfig = field(default_factory=PCAConfig)
    split: SplitConfig = field(default_factory=SplitConfig)


def from_dict(doc: dict) -> ExperimentConfig:
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    parts = {}
    for name, cls in SECTIONS.items():
        values = doc.get(name, {})
        allowed = {f.name for f in fields(cls)}
        bad = set(values) - allowed
        if bad:
            raise ConfigError(f"[{name}] has unknown key(s): {', '.join(sorted(bad))}")
        try:
            parts[name] = cls(**values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{name}]: {exc}") from exc
    return ExperimentConfig(**parts)


def load_config(path=None) -> ExperimentConfig:
    """Read a TOML file; ``None`` gives the all-defaults configuration."""
    if path is None:
        return ExperimentConfig()
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(doc)
