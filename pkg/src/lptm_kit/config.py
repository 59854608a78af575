"""Run configuration: YAML in, validated dataclasses out.

Unknown keys are rejected rather than ignored; a typo in a config file
should fail loudly, not silently train with defaults.  Command-line
overrides use dotted paths (``pretrain.steps=200``) and are applied to
the raw mapping before validation so every value passes through the
same checks.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml

from .backbone import BackboneConfig
from .data import SYNTH_DOMAINS, Corpus, SplitSpec, ingest_csv, synth_corpus
from .errors import ConfigError
from .evaluation import ABLATIONS
from .heads import FineTuneConfig
from .model import ModelConfig
from .segmenter import SegmenterConfig
from .ssl_tasks import PretrainConfig


@dataclass
class DataConfig:
    source: str = "synthetic"
    csv_path: str | None = None
    csv_fmt: str = "columns"
    csv_domain: str = "csv"
    normalize: str = "train_zscore"
    domains: tuple[str, ...] = SYNTH_DOMAINS
    series_per_domain: int = 4
    length: int = 512
    train_frac: float = 0.6
    val_frac: float = 0.2
    test_frac: float = 0.2

    def __post_init__(self):
        self.domains = tuple(self.domains)
        if self.source not in ("synthetic", "csv"):
            raise ConfigError(f"data.source must be 'synthetic' or 'csv', got {self.source!r}")
        if self.source == "csv" and not self.csv_path:
            raise ConfigError("data.source is 'csv' but data.csv_path is not set")

    def split_spec(self) -> SplitSpec:
        try:
            return SplitSpec(train=self.train_frac, val=self.val_frac, test=self.test_frac)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


@dataclass
class EvalConfig:
    protocol: str = "zero_shot"
    horizon: int = 16
    context: int = 48
    stride: int | None = None
    fractions: tuple[float, ...] = (5, 10, 20, 50, 100)
    seeds: tuple[int, ...] = (0, 1, 2)
    ablations: tuple[str, ...] = ABLATIONS

    def __post_init__(self):
        self.fractions = tuple(self.fractions)
        self.seeds = tuple(self.seeds)
        self.ablations = tuple(self.ablations)
        known = ("zero_shot", "finetune", "data_efficiency", "ablations")
        if self.protocol not in known:
            raise ConfigError(f"evaluation.protocol must be one of {known}, got {self.protocol!r}")
        for name in self.ablations:
            if name not in ABLATIONS:
                raise ConfigError(f"unknown ablation {name!r}; expected one of {ABLATIONS}")


@dataclass
class RunConfig:
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    finetune: FineTuneConfig = field(default_factory=FineTuneConfig)
    data: DataConfig = field(default_factory=DataConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_NESTED = {
    RunConfig: {
        "model": ModelConfig,
        "pretrain": PretrainConfig,
        "finetune": FineTuneConfig,
        "data": DataConfig,
        "evaluation": EvalConfig,
    },
    ModelConfig: {"segmenter": SegmenterConfig, "backbone": BackboneConfig},
}


def build_config(cls, data: dict, path: str = "") -> object:
    """Instantiate a config dataclass, rejecting unknown keys."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"expected a mapping at {path or 'top level'}, got {type(data).__name__}")
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown config key {path}{unknown[0]!r}")
    kwargs = {}
    nested = _NESTED.get(cls, {})
    for key, value in data.items():
        if key in nested:
            kwargs[key] = build_config(nested[key], value, path=f"{path}{key}.")
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from None


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply ``a.b.c=value`` assignments onto the raw mapping."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, _, text = item.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"override has an empty key: {item!r}")
        try:
            value = yaml.safe_load(text)
        except yaml.YAMLError:
            raise ConfigError(f"cannot parse override value {text!r}") from None
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            child = node.get(part)
            if child is None:
                child = {}
                node[part] = child
            if not isinstance(child, dict):
                raise ConfigError(f"override path {key!r} crosses a non-mapping value")
            node = child
        node[parts[-1]] = value
    return raw


def load_config(path=None, overrides: list[str] | None = None) -> RunConfig:
    """Read YAML (or start from defaults), apply overrides, validate."""
    raw: dict = {}
    if path is not None:
        with open(path) as handle:
            loaded = yaml.safe_load(handle)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        raw = loaded
    if overrides:
        raw = apply_overrides(raw, overrides)
    return build_config(RunConfig, raw)


def make_corpus(cfg: DataConfig, seed: int) -> Corpus:
    """Build the configured corpus (synthetic families or a CSV file)."""
    if cfg.source == "synthetic":
        return synth_corpus(
            seed,
            domains=cfg.domains,
            series_per_domain=cfg.series_per_domain,
            length=cfg.length,
            split=cfg.split_spec(),
        )
    return ingest_csv(
        cfg.csv_path,
        domain_id=cfg.csv_domain,
        fmt=cfg.csv_fmt,
        normalize=cfg.normalize,
        split=cfg.split_spec(),
    )
