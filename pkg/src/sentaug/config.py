"""Pipeline configuration: YAML file with per-module sections plus CLI overrides."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .model import ModelConfig
from .reproduce import FilterConfig
from .train import TrainConfig


class ConfigError(Exception):
    """Invalid or unreadable pipeline configuration."""


@dataclass
class PathsConfig:
    corpus: str = "data/reviews.jsonl"
    work_dir: str = "out"

    @property
    def work(self) -> Path:
        return Path(self.work_dir)

    @property
    def stats_report(self) -> Path:
        return self.work / "stats.json"

    @property
    def seed_pairs(self) -> Path:
        return self.work / "seed_pairs.jsonl"

    @property
    def prompt(self) -> Path:
        return self.work / "prompt.yaml"

    @property
    def checkpoint(self) -> Path:
        return self.work / "model.pt"

    @property
    def train_log(self) -> Path:
        return self.work / "train_log.jsonl"

    @property
    def reproduced_pairs(self) -> Path:
        return self.work / "reproduced_pairs.jsonl"

    @property
    def audit(self) -> Path:
        return self.work / "reproduction_audit.json"

    @property
    def evaluation(self) -> Path:
        return self.work / "evaluation.json"


@dataclass
class CorpusOptions:
    format: str = "jsonl"
    min_freq: int = 2
    max_encode_tokens: int = 128


@dataclass
class PromptOptions:
    k: int = 5  # seed demonstrations taken from seed_examples
    temperature: float = 0.2
    m: int = 40  # problem-transformation items in the evaluation set
    n: int = 10  # reasonable-transformation items
    delta: float = 0.80
    epsilon: float = 0.10
    max_rewrites: int | None = None
    seed_examples: str | None = None  # optional file of {source, counterfactual}

    def validate(self):
        if not 0 < self.delta <= 1:
            raise ConfigError(f"prompt.delta must be in (0, 1], got {self.delta}")
        if not 0 < self.epsilon <= 1:
            raise ConfigError(f"prompt.epsilon must be in (0, 1], got {self.epsilon}")


@dataclass
class ModelOptions:
    embedding_dim: int = 128
    hidden_dim: int = 256
    sentiment_dim: int = 64
    content_dim: int = 256
    num_classes: int = 5
    decoder_hidden_dim: int = 512
    attention_dim: int = 128
    max_decode_len: int = 70
    beam_width: int = 4

    def build(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(vocab_size=vocab_size, **asdict(self))


@dataclass
class TrainOptions:
    learning_rate: float = 5e-4
    batch_size: int = 32
    epochs: int = 20
    anneal_fraction: float = 0.2
    anneal_steps: int | None = None
    alpha_cap: float = 5.0
    beta_cap: float = 1.0
    gamma_cap: float = 1.0
    grad_clip: float = 5.0
    checkpoint_interval: int | None = None

    def build(self, seed: int) -> TrainConfig:
        return TrainConfig(seed=seed, **asdict(self))


@dataclass
class FilterOptions:
    ppl_threshold: float = 125.0
    min_ppl_chars: int = 10

    def build(self) -> FilterConfig:
        return FilterConfig(**asdict(self))


@dataclass
class ReproductionOptions:
    per_product_quota: int = 5
    parent_limit: int | None = 50
    products: list[str] | None = None  # None: every product with a rating-5 review


@dataclass
class EvaluationOptions:
    group_size: int = 8
    min_group_size: int = 2
    max_pairs: int | None = 200  # cap for counterfactual-reconstruction ROUGE


@dataclass
class ServiceOptions:
    endpoint: str = ""
    model: str = "default"
    timeout: float = 30.0
    max_retries: int = 3


@dataclass
class PipelineConfig:
    seed: int = 0
    workers: int = 1
    paths: PathsConfig = field(default_factory=PathsConfig)
    corpus: CorpusOptions = field(default_factory=CorpusOptions)
    prompt: PromptOptions = field(default_factory=PromptOptions)
    model: ModelOptions = field(default_factory=ModelOptions)
    training: TrainOptions = field(default_factory=TrainOptions)
    filter: FilterOptions = field(default_factory=FilterOptions)
    reproduction: ReproductionOptions = field(default_factory=ReproductionOptions)
    evaluation: EvaluationOptions = field(default_factory=EvaluationOptions)
    service: ServiceOptions = field(default_factory=ServiceOptions)

    def validate(self):
        self.prompt.validate()
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "paths": PathsConfig,
    "corpus": CorpusOptions,
    "prompt": PromptOptions,
    "model": ModelOptions,
    "training": TrainOptions,
    "filter": FilterOptions,
    "reproduction": ReproductionOptions,
    "evaluation": EvaluationOptions,
    "service": ServiceOptions,
}


def _build_section(cls, data, name):
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: {sorted(unknown)}")
    return cls(**data)


def load_config(path=None) -> PipelineConfig:
    """Load a YAML pipeline config; missing sections fall back to defaults."""
    if path is None:
        return PipelineConfig().validate()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config root must be a mapping: {path}")

    cfg = PipelineConfig()
    for key, value in doc.items():
        if key == "seed":
            cfg.seed = int(value)
        elif key == "workers":
            cfg.workers = int(value)
        elif key in _SECTIONS:
            setattr(cfg, key, _build_section(_SECTIONS[key], value, key))
        else:
            raise ConfigError(f"unknown top-level config key {key!r}")
    return cfg.validate()
