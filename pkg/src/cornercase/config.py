"""Single JSON pipeline configuration with strict key checking."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from cornercase.clustering import ClusteringConfig
from cornercase.criteria import KdeConfig
from cornercase.decision import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class ThresholdConfig:
    tp_iou: float = 0.5
    fp_iou: float = 0.1
    iou_source: str = "box"


@dataclass
class ClassifierConfig:
    kind: str = "tree"  # or "forest"
    max_depth: int = 12
    min_leaf: int = 5
    n_trees: int = 100
    features_per_split: int | None = None

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            max_depth=self.max_depth,
            min_leaf=self.min_leaf,
            n_trees=self.n_trees,
            features_per_split=self.features_per_split,
            seed=seed,
        )


@dataclass
class SfsConfig:
    direction: str = "forward"
    n_select: int = 10
    folds: int = 5


@dataclass
class CycleConfig:
    min_cc: int = 1


@dataclass
class PipelineConfig:
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    kde: KdeConfig = field(default_factory=KdeConfig)
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    sfs: SfsConfig = field(default_factory=SfsConfig)
    cycle: CycleConfig = field(default_factory=CycleConfig)
    seed: int = 0
    jobs: int = 1

    def to_json(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "clustering": ClusteringConfig,
    "kde": KdeConfig,
    "thresholds": ThresholdConfig,
    "classifier": ClassifierConfig,
    "sfs": SfsConfig,
    "cycle": CycleConfig,
}


def _build_section(cls, obj, path):
    known = {f.name for f in fields(cls)}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in config section {path!r}")
    try:
        return cls(**obj)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config section {path!r}: {exc}") from exc


def config_from_dict(obj: dict) -> PipelineConfig:
    known = set(_SECTIONS) | {"seed", "jobs"}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown top-level config key(s): {sorted(unknown)}")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name in obj:
            if not isinstance(obj[name], dict):
                raise ConfigError(f"config section {name!r} must be an object")
            kwargs[name] = _build_section(cls, obj[name], name)
    if "seed" in obj:
        kwargs["seed"] = int(obj["seed"])
    if "jobs" in obj:
        kwargs["jobs"] = int(obj["jobs"])
    return PipelineConfig(**kwargs)


def load_config(path) -> PipelineConfig:
    with open(path) as f:
        return config_from_dict(json.load(f))
