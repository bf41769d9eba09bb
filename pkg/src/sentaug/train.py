"""Training loop for the disentangled autoencoder: annealed multi-loss
optimization, linear learning-rate decay, checkpointing, progress logging.
"""

from __future__ import annotations

import json
import math
import random
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch

from .corpus import Vocabulary, tokenize
from .model import (
    DisentangledAutoencoder,
    ModelConfig,
    PairBatch,
    ReviewBatch,
    class_for_rating,
    loss_total,
    review_loss_total,
)

CHECKPOINT_FORMAT = "sentaug.checkpoint"
CHECKPOINT_VERSION = 1

PROGRESS_FIELDS = (
    "step", "lr", "alpha", "beta", "gamma",
    "L_rec", "L_e", "L_n", "L_r", "L_dis", "L_cf", "total",
)


class TrainingError(Exception):
    """Aborted optimization, e.g. a loss term went non-finite."""


class CheckpointError(Exception):
    """Unreadable or structurally invalid checkpoint file."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-4
    batch_size: int = 32
    epochs: int = 20
    anneal_fraction: float = 0.2  # share of total steps spent ramping weights
    anneal_steps: int | None = None  # explicit override of the ramp length
    alpha_cap: float = 5.0
    beta_cap: float = 1.0
    gamma_cap: float = 1.0
    grad_clip: float = 5.0
    seed: int = 0
    checkpoint_interval: int | None = None

    def __post_init__(self):
        if min(self.alpha_cap, self.beta_cap, self.gamma_cap) < 0:
            raise ValueError("loss-weight caps must be non-negative")
        if self.anneal_steps is not None and self.anneal_steps < 1:
            raise ValueError("anneal_steps must be >= 1")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")


@dataclass
class StepRecord:
    step: int
    lr: float
    alpha: float
    beta: float
    gamma: float
    L_rec: float
    L_e: float
    L_n: float
    L_r: float
    L_dis: float
    L_cf: float
    total: float

    def to_record(self) -> dict:
        data = asdict(self)
        return {k: data[k] for k in PROGRESS_FIELDS}


@dataclass
class TrainReport:
    history: list[StepRecord] = field(default_factory=list)
    checkpoint_path: str | None = None
    duration_seconds: float = 0.0


def anneal_weight(step: int, cap: float, anneal_steps: int) -> float:
    """Linear ramp from 0 at step 0 up to ``cap`` at ``anneal_steps``."""
    if step < 0:
        raise ValueError("step must be >= 0")
    return min(step / anneal_steps, 1.0) * cap


def build_model(config: ModelConfig, seed: int = 0) -> DisentangledAutoencoder:
    """Seeded model construction so runs are reproducible end to end."""
    torch.manual_seed(seed)
    return DisentangledAutoencoder(config)


def save_checkpoint(model: DisentangledAutoencoder, vocab: Vocabulary, path) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "vocab": {"tokens": vocab.tokens, "min_freq": vocab.min_freq},
        "state_dict": model.state_dict(),
    }
    torch.save(payload, path)
    return str(path)


def load_checkpoint(path) -> tuple[DisentangledAutoencoder, Vocabulary]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a recognized checkpoint")
    model = DisentangledAutoencoder(ModelConfig(**payload["config"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    vocab = Vocabulary(payload["vocab"]["tokens"], min_freq=payload["vocab"]["min_freq"])
    return model, vocab


def _check_finite(breakdown, step: int):
    for name, value in breakdown.items():
        if not torch.isfinite(value):
            raise TrainingError(f"non-finite loss term {name} at step {step}")


def _run_loop(model, items, config: TrainConfig, step_loss, checkpoint_cb, progress_path):
    """Shared seeded epoch/batch loop; ``step_loss(batch_items, a, b, g)``
    returns (total, breakdown)."""
    started = time.monotonic()
    report = TrainReport()
    n = len(items)
    if config.epochs == 0 or n == 0:
        checkpoint_cb(report)
        report.duration_seconds = time.monotonic() - started
        return report

    steps_per_epoch = math.ceil(n / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    anneal_steps = config.anneal_steps or max(1, int(config.anneal_fraction * total_steps))

    torch.manual_seed(config.seed)
    order_rng = random.Random(config.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda s: max(0.0, 1.0 - s / total_steps)
    )

    progress = None
    if progress_path is not None:
        progress_path = Path(progress_path)
        progress_path.parent.mkdir(parents=True, exist_ok=True)
        progress = progress_path.open("w", encoding="utf-8")

    model.train()
    step = 0
    try:
        for _ in range(config.epochs):
            order = list(range(n))
            order_rng.shuffle(order)
            for start in range(0, n, config.batch_size):
                batch_items = [items[i] for i in order[start : start + config.batch_size]]
                alpha = anneal_weight(step, config.alpha_cap, anneal_steps)
                beta = anneal_weight(step, config.beta_cap, anneal_steps)
                gamma = anneal_weight(step, config.gamma_cap, anneal_steps)
                lr = optimizer.param_groups[0]["lr"]

                total, breakdown = step_loss(batch_items, alpha, beta, gamma)
                _check_finite(breakdown, step)
                optimizer.zero_grad()
                total.backward()
                torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
                optimizer.step()
                scheduler.step()

                record = StepRecord(
                    step=step, lr=lr, alpha=alpha, beta=beta, gamma=gamma,
                    **{k: float(v.detach()) for k, v in breakdown.items() if k != "total"},
                    total=float(breakdown["total"].detach()),
                )
                report.history.append(record)
                if progress is not None:
                    progress.write(json.dumps(record.to_record()) + "\n")
                step += 1
                if config.checkpoint_interval and step % config.checkpoint_interval == 0:
                    checkpoint_cb(report)
        checkpoint_cb(report)
    finally:
        if progress is not None:
            progress.close()
    model.eval()
    report.duration_seconds = time.monotonic() - started
    return report


def train(
    model: DisentangledAutoencoder,
    pairs,
    vocab: Vocabulary,
    config: TrainConfig,
    checkpoint_path=None,
    progress_path=None,
) -> TrainReport:
    """Optimize the full pair objective on counterfactual pairs."""
    cap = model.config.max_decode_len
    tokenized = [
        (tokenize(p.positive.text, vocab, cap), tokenize(p.negative.text, vocab, cap))
        for p in pairs
    ]

    def step_loss(batch_items, alpha, beta, gamma):
        batch = PairBatch.from_token_pairs(batch_items)
        return loss_total(model, batch, alpha, beta, gamma)

    def checkpoint_cb(report):
        if checkpoint_path is not None:
            report.checkpoint_path = save_checkpoint(model, vocab, checkpoint_path)

    return _run_loop(model, tokenized, config, step_loss, checkpoint_cb, progress_path)


def train_on_reviews(
    model: DisentangledAutoencoder,
    reviews,
    vocab: Vocabulary,
    config: TrainConfig,
    checkpoint_path=None,
    progress_path=None,
) -> TrainReport:
    """Plain autoencoder training on rated reviews (no pair-relational terms).

    Used for the downstream mean-latent summarizer, whose training corpus is
    a review set rather than a pair set.
    """
    cap = model.config.max_decode_len
    num_classes = model.config.num_classes
    tokenized = [
        (tokenize(r.text, vocab, cap), class_for_rating(r.rating, num_classes))
        for r in reviews
    ]

    def step_loss(batch_items, alpha, beta, gamma):
        tokens = [t for t, _ in batch_items]
        labels = [l for _, l in batch_items]
        batch = ReviewBatch.from_token_lists(tokens, labels)
        return review_loss_total(model, batch, alpha)

    def checkpoint_cb(report):
        if checkpoint_path is not None:
            report.checkpoint_path = save_checkpoint(model, vocab, checkpoint_path)

    return _run_loop(model, tokenized, config, step_loss, checkpoint_cb, progress_path)
