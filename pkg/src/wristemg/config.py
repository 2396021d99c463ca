"""Run configuration: one TOML file with a table per module.

Example::

    seed = 7

    [selection]
    n_channels = 3

    [features]
    window_len = 20
    stride = 5

Unknown tables or keys are rejected. Command-line flags (``--seed``,
``--channels``) override file values, which override the defaults.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .features import FeatureConfig
from .preprocess import PreprocessConfig
from .synthgen import SynthSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SelectionConfig:
    bins: int = 16
    force_bins: int = 10
    n_channels: int = 3
    channels: tuple | None = None
    target: str = "gesture"

    def __post_init__(self):
        if self.bins < 2 or self.force_bins < 2:
            raise ValueError("bin counts must be >= 2")
        if not 1 <= self.n_channels <= 8:
            raise ValueError("n_channels must be in 1..8")
        if self.channels is not None:
            object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if self.target not in ("gesture", "force"):
            raise ValueError("selection target must be 'gesture' or 'force'")


@dataclass(frozen=True)
class ReductionConfig:
    variance_target: float = 0.95

    def __post_init__(self):
        if not 0.0 < self.variance_target <= 1.0:
            raise ValueError("variance_target must lie in (0, 1]")


@dataclass(frozen=True)
class ModelConfig:
    k: int = 10
    min_leaf: int = 10
    force_filter_hz: float = 1.0
    force_percentile: float = 95.0
    # "fold": one normalization fitted on the pooled training force;
    # "sequence": every sequence normalized by its own min / percentile
    force_norm_scope: str = "fold"

    def __post_init__(self):
        if self.k < 1 or self.min_leaf < 1:
            raise ValueError("k and min_leaf must be >= 1")
        if self.force_norm_scope not in ("fold", "sequence"):
            raise ValueError("force_norm_scope must be 'fold' or 'sequence'")


@dataclass(frozen=True)
class EvalConfig:
    folds: int = 5
    mdape_eps: float = 0.05
    gr_include_step: bool = False

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        if not self.mdape_eps > 0:
            raise ValueError("mdape_eps must be positive")


@dataclass(frozen=True)
class RunConfig:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    reduction: ReductionConfig = field(default_factory=ReductionConfig)
    models: ModelConfig = field(default_factory=ModelConfig)
    synth: SynthSpec = field(default_factory=SynthSpec)
    eval: EvalConfig = field(default_factory=EvalConfig)
    seed: int = 0

    def __post_init__(self):
        self.preprocess.validate()

    def synth_spec(self) -> SynthSpec:
        return replace(self.synth, seed=self.seed)

    def with_overrides(self, seed=None, channels=None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        if channels is not None:
            chans = tuple(channels)
            cfg = replace(cfg, selection=replace(cfg.selection, channels=chans, n_channels=len(chans)))
        return cfg


_SECTIONS = {
    "preprocess": PreprocessConfig,
    "features": FeatureConfig,
    "selection": SelectionConfig,
    "reduction": ReductionConfig,
    "models": ModelConfig,
    "synth": SynthSpec,
    "eval": EvalConfig,
}


def _tupled(v):
    if isinstance(v, list):
        return tuple(_tupled(x) for x in v)
    return v


def config_from_dict(d: dict) -> RunConfig:
    kwargs = {}
    for key, value in d.items():
        if key == "seed":
            if not isinstance(value, int):
                raise ConfigError("seed must be an integer")
            kwargs["seed"] = value
            continue
        cls = _SECTIONS.get(key)
        if cls is None:
            raise ConfigError(f"unknown config table [{key}]")
        if not isinstance(value, dict):
            raise ConfigError(f"[{key}] must be a table")
        allowed = {f.name for f in fields(cls)}
        unknown = sorted(set(value) - allowed)
        if unknown:
            raise ConfigError(f"unknown key(s) in [{key}]: {', '.join(unknown)}")
        try:
            kwargs[key] = cls(**{k: _tupled(v) for k, v in value.items()})
        except (TypeError, ValueError) as e:
            raise ConfigError(f"[{key}]: {e}") from None
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None
    return config_from_dict(data)
