"""Run configuration: nested dataclasses with TOML loading."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .membrane import BubbleConfig
from .pose import IcpParams
from .render import DarkRegionModel, GlareModel, NoiseModel, SensorRig
from .touch import TouchConfig


@dataclass(frozen=True)
class ClassifierConfig:
    feature_size: int = 28


@dataclass(frozen=True)
class DatasetConfig:
    per_class_train: int = 200
    per_class_val: int = 50


@dataclass(frozen=True)
class RunConfig:
    bubble: BubbleConfig = field(default_factory=BubbleConfig)
    standoff: float = 104.0  # mm, camera below the rim plane
    noise: NoiseModel = field(default_factory=NoiseModel)
    touch: TouchConfig = field(default_factory=TouchConfig)
    icp: IcpParams = field(default_factory=IcpParams)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    seed: int = 0

    def rig(self) -> SensorRig:
        return SensorRig(standoff=self.standoff, bubble=self.bubble)


def load_config(path=None, seed: int | None = None) -> RunConfig:
    if path is None:
        cfg = RunConfig()
        return RunConfig(seed=seed) if seed is not None else cfg
    raw = tomllib.loads(Path(path).read_text())
    bubble = BubbleConfig(**raw.get("bubble", {}))
    noise_raw = dict(raw.get("noise", {}))
    dark = DarkRegionModel(**noise_raw.pop("dark_region", {}))
    glare = GlareModel(**noise_raw.pop("glare", {}))
    noise = NoiseModel(dark_region=dark, glare=glare, **noise_raw)
    rig_raw = raw.get("rig", {})
    return RunConfig(
        bubble=bubble,
        standoff=rig_raw.get("standoff", 104.0),
        noise=noise,
        touch=TouchConfig(**raw.get("touch", {})),
        icp=IcpParams(**raw.get("icp", {})),
        classifier=ClassifierConfig(**raw.get("classifier", {})),
        dataset=DatasetConfig(**raw.get("dataset", {})),
        seed=seed if seed is not None else raw.get("seed", 0),
    )
