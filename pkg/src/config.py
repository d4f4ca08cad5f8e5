'''
Run configuration: one JSON document per run, validated as a whole.

Sections: data, split, model, objective, train, eval, bound and an optional
preset naming a published (dataset, variant, setting) configuration. Every
invalid field is reported in a single ConfigError.
'''
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from consts import DataFormat, Setting
from src.dataset import SplitSpec
from src.model import ModelConfig
from src.objective import ObjectiveSpec
from src.trainer import TrainConfig
from src.utils._consts import get_best_params, get_threshold
from src.utils.exceptions import ArgumentError, ConfigError
from src.utils.logger import Logger

logger = Logger("[config]")

CONFIG_FILE = "config.json"


@dataclass(frozen=True)
class DataSection:
    raw_path: Optional[str] = None
    format: DataFormat = DataFormat.TSV_RATING
    prepared_dir: Optional[str] = None
    name: Optional[str] = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "format", DataFormat(self.format))
        except ValueError:
            raise ConfigError(f"data.format must be one of tsv_rating, tsv_click; got {self.format!r}")


@dataclass(frozen=True)
class EvalSection:
    setting: Setting = Setting.INTERACTED
    ells: Tuple[int, ...] = (1, 5, 10)
    skip_no_relevant: bool = False
    all_includes_train: bool = False

    def __post_init__(self):
        problems = []
        try:
            object.__setattr__(self, "setting", Setting(self.setting))
        except ValueError:
            problems.append(f"eval.setting must be interacted or all, got {self.setting!r}")
        object.__setattr__(self, "ells", tuple(int(ell) for ell in self.ells))
        if not self.ells or min(self.ells) < 1:
            problems.append(f"eval.ells must be cut-offs >= 1, got {list(self.ells)}")
        if problems:
            raise ConfigError(problems)


@dataclass(frozen=True)
class BoundSection:
    delta: float = 0.05
    caps: Optional[Tuple[int, int]] = None
    half_credit: bool = False
    sweep_ks: Tuple[int, ...] = tuple(range(1, 21))
    trials: int = 5
    init_scale: float = 1.0

    def __post_init__(self):
        problems = []
        if not 0.0 < self.delta < 1.0:
            problems.append(f"bound.delta must be in (0, 1), got {self.delta}")
        if self.caps is not None:
            object.__setattr__(self, "caps", tuple(int(c) for c in self.caps))
            if len(self.caps) != 2 or min(self.caps) < 1:
                problems.append(f"bound.caps must be two counts >= 1, got {list(self.caps)}")
        object.__setattr__(self, "sweep_ks", tuple(int(k) for k in self.sweep_ks))
        if not self.sweep_ks or min(self.sweep_ks) < 1:
            problems.append("bound.sweep_ks must be embedding sizes >= 1")
        if self.trials < 1:
            problems.append(f"bound.trials must be >= 1, got {self.trials}")
        if problems:
            raise ConfigError(problems)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    data: DataSection = field(default_factory=DataSection)
    split: SplitSpec = field(default_factory=SplitSpec)
    model: ModelConfig = field(default_factory=ModelConfig)
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalSection = field(default_factory=EvalSection)
    bound: BoundSection = field(default_factory=BoundSection)
    preset: Optional[Dict[str, str]] = None


SECTIONS = {
    "data": DataSection,
    "split": SplitSpec,
    "model": ModelConfig,
    "objective": ObjectiveSpec,
    "train": TrainConfig,
    "eval": EvalSection,
    "bound": BoundSection,
}


def derive_seeds(root_seed):
    """Independent (split, model, sampler) seeds from one root seed."""
    children = np.random.SeedSequence(root_seed).spawn(3)
    return tuple(int(child.generate_state(1)[0]) for child in children)


def _build_section(name, cls, values, problems):
    known = {f.name for f in fields(cls) if f.init}
    unknown = sorted(set(values) - known)
    if unknown:
        problems.append(f"{name}: unknown keys {unknown}")
        values = {key: value for key, value in values.items() if key in known}
    try:
        return cls(**values)
    except ConfigError as error:
        problems.extend(f"{name}: {problem}" for problem in error.problems)
    except (ArgumentError, TypeError, ValueError) as error:
        problems.append(f"{name}: {error}")
    return None


def parse_config(document: Dict[str, Any], seed=None) -> RunConfig:
    problems = []
    if not isinstance(document, dict):
        raise ConfigError("configuration must be a JSON object")

    unknown = sorted(set(document) - set(SECTIONS) - {"seed", "preset"})
    if unknown:
        problems.append(f"unknown sections {unknown}")

    root_seed = seed if seed is not None else document.get("seed", 0)
    if not isinstance(root_seed, int) or root_seed < 0:
        problems.append(f"seed must be a non-negative integer, got {root_seed!r}")
        root_seed = 0
    subsample_seed, model_seed, sampler_seed = derive_seeds(root_seed)

    raw = {name: dict(document.get(name) or {}) for name in SECTIONS}

    preset = document.get("preset")
    if preset is not None:
        try:
            best = get_best_params(preset["dataset"], preset["variant"], preset.get("setting", "interacted"))
            raw["model"] = {"embed_dim": best["embed_dim"], "hidden_units": best["hidden_units"], **raw["model"]}
            raw["objective"] = {"variant": preset["variant"], "lam": best["lam"], **raw["objective"]}
        except (KeyError, ValueError, TypeError) as error:
            problems.append(f"preset: {error}")

    raw["model"].setdefault("seed", model_seed)
    raw["train"].setdefault("seed", sampler_seed)
    if "threshold" not in raw["split"] and "format" in raw["data"]:
        try:
            raw["split"]["threshold"] = get_threshold(raw["data"]["format"])
        except ValueError:
            pass

    built = {name: _build_section(name, cls, raw[name], problems) for name, cls in SECTIONS.items()}
    if problems:
        raise ConfigError(problems)

    config = RunConfig(seed=root_seed, preset=preset, **built)
    logger.debug(f"Configuration parsed (seed={root_seed}, split seed={subsample_seed})")
    return config


def split_seed(config: RunConfig):
    return derive_seeds(config.seed)[0]


def load_config(path=None, seed=None) -> RunConfig:
    if path is None:
        return parse_config({}, seed=seed)
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found")
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as error:
        raise ConfigError(f"{path}: not valid JSON ({error})")
    return parse_config(document, seed=seed)


def _plain(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


def to_document(config: RunConfig):
    return _plain(asdict(config))


def override(config: RunConfig, section, **values) -> RunConfig:
    """A copy of `config` with some fields of one section replaced; None values are ignored."""
    values = {key: value for key, value in values.items() if value is not None}
    if not values:
        return config
    return replace(config, **{section: replace(getattr(config, section), **values)})


def write_config(config: RunConfig, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / CONFIG_FILE).write_text(json.dumps(to_document(config), indent=2) + "\n")
