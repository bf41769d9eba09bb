"""Disentangled review autoencoder.

A bidirectional recurrent encoder produces per-token states; two attention
heads pool them into a sentiment latent and a content latent. A shared
linear classifier scores every latent; the classifier's distribution over
classes re-weights a learnable per-class label-embedding table into a soft
sentiment replacement, which is concatenated with the content latent and
decoded back into text. Training combines reconstruction, emotion,
neutrality, label, distance and counterfactual-reconstruction losses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import torch
import torch.nn.functional as F
from torch import Tensor, nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .corpus import BOS, EOS, PAD

PROB_FLOOR = 1e-8


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    embedding_dim: int = 128
    hidden_dim: int = 256  # per direction; token states are 2x this
    sentiment_dim: int = 64
    content_dim: int = 256
    num_classes: int = 5
    decoder_hidden_dim: int = 512
    attention_dim: int = 128
    max_decode_len: int = 70
    beam_width: int = 4
    prob_floor: float = PROB_FLOOR

    def __post_init__(self):
        for name in ("vocab_size", "embedding_dim", "hidden_dim", "sentiment_dim",
                     "content_dim", "decoder_hidden_dim", "attention_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")

    @property
    def latent_dim(self) -> int:
        return self.sentiment_dim + self.content_dim


@dataclass
class LatentFactors:
    sentiment: Tensor  # z_e
    content: Tensor  # z_c
    replaced_sentiment: Tensor  # convex combination of label embeddings
    class_probs: Tensor

    @property
    def combined(self) -> Tensor:
        return torch.cat([self.replaced_sentiment, self.content], dim=-1)


@dataclass
class EncoderOutput:
    token_states: Tensor  # (T, 2*hidden)
    pooled_mean: Tensor  # (2*hidden,)
    sentiment_weights: Tensor  # (T,)
    content_weights: Tensor  # (T,)
    factors: LatentFactors


class AttentionPooling(nn.Module):
    """Additive attention over token states followed by a projection."""

    def __init__(self, state_dim, attention_dim, out_dim):
        super().__init__()
        self.key = nn.Linear(state_dim, attention_dim)
        self.query = nn.Linear(attention_dim, 1, bias=False)
        self.proj = nn.Linear(state_dim, out_dim)

    def forward(self, states: Tensor, mask: Tensor):
        scores = self.query(torch.tanh(self.key(states))).squeeze(-1)
        scores = scores.masked_fill(~mask, float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        pooled = torch.bmm(weights.unsqueeze(1), states).squeeze(1)
        return self.proj(pooled), weights


def class_for_rating(rating: int, num_classes: int) -> int:
    """Map a 1..5 rating onto the classifier's class index."""
    if num_classes == 5:
        return rating - 1
    return round((rating - 1) * (num_classes - 1) / 4)


class DisentangledAutoencoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        state_dim = 2 * config.hidden_dim
        self.embedding = nn.Embedding(config.vocab_size, config.embedding_dim, padding_idx=PAD)
        self.encoder = nn.LSTM(
            config.embedding_dim, config.hidden_dim, batch_first=True, bidirectional=True
        )
        self.sentiment_attention = AttentionPooling(
            state_dim, config.attention_dim, config.sentiment_dim
        )
        self.content_attention = AttentionPooling(
            state_dim, config.attention_dim, config.content_dim
        )
        self.classifier = nn.Linear(config.sentiment_dim, config.num_classes)
        if config.content_dim != config.sentiment_dim:
            self.content_adapter = nn.Linear(config.content_dim, config.sentiment_dim)
        else:
            self.content_adapter = None
        self.label_embeddings = nn.Parameter(
            torch.randn(config.num_classes, config.sentiment_dim) * 0.1
        )
        self.decoder = nn.LSTM(
            config.embedding_dim + config.latent_dim,
            config.decoder_hidden_dim,
            batch_first=True,
        )
        self.decoder_init_h = nn.Linear(config.latent_dim, config.decoder_hidden_dim)
        self.decoder_init_c = nn.Linear(config.latent_dim, config.decoder_hidden_dim)
        self.out_proj = nn.Linear(config.decoder_hidden_dim, config.vocab_size)

    # ---------------------------------------------------------------- encode

    def _encode_states(self, ids: Tensor, lengths: Tensor):
        emb = self.embedding(ids)
        packed = pack_padded_sequence(
            emb, lengths.cpu(), batch_first=True, enforce_sorted=False
        )
        out, _ = self.encoder(packed)
        states, _ = pad_packed_sequence(out, batch_first=True, total_length=ids.shape[1])
        mask = torch.arange(ids.shape[1], device=ids.device)[None, :] < lengths[:, None]
        return states, mask

    def encode_batch(self, ids: Tensor, lengths: Tensor):
        """Latents for a padded batch; returns (factors, mean_pool, attention weights)."""
        states, mask = self._encode_states(ids, lengths)
        denom = lengths.to(states.dtype).unsqueeze(-1)
        pooled_mean = (states * mask.unsqueeze(-1)).sum(dim=1) / denom
        z_e, w_e = self.sentiment_attention(states, mask)
        z_c, w_c = self.content_attention(states, mask)
        probs = self.classify(z_e)
        z_tilde = self.soft_replace(probs)
        factors = LatentFactors(
            sentiment=z_e, content=z_c, replaced_sentiment=z_tilde, class_probs=probs
        )
        return factors, pooled_mean, (states, mask, w_e, w_c)

    def encode(self, ids: Sequence[int] | Tensor) -> EncoderOutput:
        """Encode one token-id sequence (as produced by the corpus tokenizer)."""
        if not torch.is_tensor(ids):
            ids = torch.tensor(ids, dtype=torch.long)
        if ids.ndim != 1 or ids.numel() == 0:
            raise ValueError("encode expects a non-empty 1-d token id sequence")
        device = self.embedding.weight.device
        batch = ids.unsqueeze(0).to(device)
        lengths = torch.tensor([ids.numel()], device=device)
        factors, pooled_mean, (states, _, w_e, w_c) = self.encode_batch(batch, lengths)
        return EncoderOutput(
            token_states=states[0],
            pooled_mean=pooled_mean[0],
            sentiment_weights=w_e[0],
            content_weights=w_c[0],
            factors=LatentFactors(
                sentiment=factors.sentiment[0],
                content=factors.content[0],
                replaced_sentiment=factors.replaced_sentiment[0],
                class_probs=factors.class_probs[0],
            ),
        )

    # --------------------------------------------------------------- classify

    def classify(self, vector: Tensor) -> Tensor:
        """Softmax class distribution for a sentiment- or content-sized latent."""
        dim = vector.shape[-1]
        if dim == self.config.sentiment_dim:
            logits = self.classifier(vector)
        elif self.content_adapter is not None and dim == self.config.content_dim:
            logits = self.classifier(self.content_adapter(vector))
        else:
            raise ValueError(f"classify got dim {dim}; expected sentiment or content dim")
        return torch.softmax(logits, dim=-1)

    def soft_replace(self, class_probs: Tensor) -> Tensor:
        """Convex combination of the label-embedding rows, weighted by class_probs."""
        return class_probs @ self.label_embeddings

    # ----------------------------------------------------------------- decode

    def _decoder_init(self, latent: Tensor):
        h0 = torch.tanh(self.decoder_init_h(latent)).unsqueeze(0)
        c0 = self.decoder_init_c(latent).unsqueeze(0)
        return h0, c0

    def decode_teacher_forced(self, latent: Tensor, gold: Tensor) -> Tensor:
        """Per-step log-probabilities of a gold sequence given a latent.

        ``latent`` is (B, latent_dim) or (latent_dim,); ``gold`` a padded
        (B, T) or (T,) id tensor starting with BOS and ending with EOS.
        Returns (B, T-1, vocab) log-probabilities (squeezed for 1-d input).
        """
        squeeze = latent.ndim == 1
        if squeeze:
            latent, gold = latent.unsqueeze(0), gold.unsqueeze(0)
        if gold.shape[1] < 2:
            raise ValueError("gold must contain at least BOS and EOS")
        if gold.shape[1] > self.config.max_decode_len + 2:
            raise ValueError(
                f"gold length {gold.shape[1]} exceeds max decode length "
                f"{self.config.max_decode_len} (+BOS/EOS)"
            )
        inputs = gold[:, :-1]
        emb = self.embedding(inputs)
        expanded = latent.unsqueeze(1).expand(-1, inputs.shape[1], -1)
        out, _ = self.decoder(torch.cat([emb, expanded], dim=-1), self._decoder_init(latent))
        log_probs = torch.log_softmax(self.out_proj(out), dim=-1)
        return log_probs[0] if squeeze else log_probs

    @torch.no_grad()
    def decode_greedy(self, latent: Tensor, max_len: int | None = None) -> list[int]:
        """Stepwise argmax decoding; reference for beam width 1."""
        max_len = self.config.max_decode_len if max_len is None else max_len
        state = self._decoder_init(latent.unsqueeze(0))
        token = torch.tensor([[BOS]], device=latent.device)
        out_ids: list[int] = []
        for _ in range(max_len):
            emb = self.embedding(token)
            step_in = torch.cat([emb, latent.view(1, 1, -1)], dim=-1)
            out, state = self.decoder(step_in, state)
            next_id = int(torch.log_softmax(self.out_proj(out[0, 0]), dim=-1).argmax())
            if next_id == EOS:
                break
            out_ids.append(next_id)
            token = torch.tensor([[next_id]], device=latent.device)
        return out_ids

    @torch.no_grad()
    def decode_beam(
        self, latent: Tensor, beam_width: int | None = None, max_len: int | None = None
    ) -> list[int]:
        """Length-normalized beam search from a latent; deterministic.

        Returns generated token ids without BOS/EOS, at most ``max_len`` long.
        """
        beam_width = self.config.beam_width if beam_width is None else beam_width
        max_len = self.config.max_decode_len if max_len is None else max_len
        if beam_width < 1:
            raise ValueError("beam width must be >= 1")
        latent_row = latent.view(1, -1)
        # Each live beam: (total_logp, ids_without_bos, lstm_state)
        beams = [(0.0, [], self._decoder_init(latent_row))]
        finished: list[tuple[float, list[int]]] = []
        for _ in range(max_len):
            candidates = []
            for total, ids, state in beams:
                prev = ids[-1] if ids else BOS
                token = torch.tensor([[prev]], device=latent.device)
                step_in = torch.cat([self.embedding(token), latent_row.unsqueeze(1)], dim=-1)
                out, new_state = self.decoder(step_in, state)
                log_probs = torch.log_softmax(self.out_proj(out[0, 0]), dim=-1)
                top = torch.topk(log_probs, min(beam_width, log_probs.numel()))
                for logp, tok in zip(top.values.tolist(), top.indices.tolist()):
                    candidates.append((total + logp, ids, tok, new_state))
            candidates.sort(key=lambda c: c[0], reverse=True)
            beams = []
            for total, ids, tok, state in candidates:
                if len(beams) >= beam_width:
                    break
                if tok == EOS:
                    finished.append((total / (len(ids) + 1), ids))
                else:
                    beams.append((total, ids + [tok], state))
            if not beams or len(finished) >= beam_width:
                break
        for total, ids, _ in beams:
            if ids:
                finished.append((total / len(ids), ids))
        if not finished:
            return []
        finished.sort(key=lambda c: c[0], reverse=True)
        return finished[0][1]


# ------------------------------------------------------------------- batches


@dataclass
class PairBatch:
    """Padded counterfactual-pair token batch."""

    positive_ids: Tensor
    positive_lengths: Tensor
    negative_ids: Tensor
    negative_lengths: Tensor

    @classmethod
    def from_token_pairs(cls, token_pairs, device="cpu") -> "PairBatch":
        pos, neg = zip(*token_pairs)
        return cls(*_pad(pos, device), *_pad(neg, device))

    def __len__(self):
        return self.positive_ids.shape[0]


@dataclass
class ReviewBatch:
    """Padded single-review batch with class labels (plain autoencoder mode)."""

    ids: Tensor
    lengths: Tensor
    labels: Tensor

    @classmethod
    def from_token_lists(cls, token_lists, labels, device="cpu") -> "ReviewBatch":
        ids, lengths = _pad(token_lists, device)
        return cls(ids, lengths, torch.tensor(labels, dtype=torch.long, device=device))

    def __len__(self):
        return self.ids.shape[0]


def _pad(sequences, device):
    lengths = torch.tensor([len(s) for s in sequences], dtype=torch.long, device=device)
    width = int(lengths.max())
    ids = torch.full((len(sequences), width), PAD, dtype=torch.long, device=device)
    for i, seq in enumerate(sequences):
        ids[i, : len(seq)] = torch.as_tensor(seq, dtype=torch.long, device=device)
    return ids, lengths


# -------------------------------------------------------------------- losses


def _log(probs: Tensor, floor: float) -> Tensor:
    return torch.log(probs.clamp_min(floor))


def sequence_nll(model, latent: Tensor, gold: Tensor, lengths: Tensor) -> Tensor:
    """Mean over batch of per-sequence summed token NLL."""
    log_probs = model.decode_teacher_forced(latent, gold)
    targets = gold[:, 1:]
    token_nll = -log_probs.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    steps = torch.arange(targets.shape[1], device=gold.device)
    mask = steps[None, :] < (lengths - 1)[:, None]
    return (token_nll * mask).sum(dim=1).mean()


def _cross_entropy(probs: Tensor, labels: Tensor, floor: float) -> Tensor:
    picked = probs.gather(-1, labels.unsqueeze(-1)).squeeze(-1)
    return -_log(picked, floor).mean()


def uniform_kl(probs: Tensor, floor: float = PROB_FLOOR) -> Tensor:
    """KL(U || p) per row: sum_i (1/M) log((1/M) / p_i)."""
    m = probs.shape[-1]
    u = 1.0 / m
    return (u * (math.log(u) - _log(probs, floor))).sum(dim=-1)


def cosine(a: Tensor, b: Tensor) -> Tensor:
    na, nb = a.norm(dim=-1), b.norm(dim=-1)
    if (na == 0).any() or (nb == 0).any():
        raise ValueError("cosine similarity undefined for zero-norm latents")
    return (a * b).sum(dim=-1) / (na * nb)


@dataclass
class PairForward:
    positive: LatentFactors
    negative: LatentFactors
    terms: dict[str, Tensor] = field(default_factory=dict)


def forward_pair_batch(model: DisentangledAutoencoder, batch: PairBatch) -> PairForward:
    """One full forward pass over a pair batch, producing every loss term."""
    cfg = model.config
    floor = cfg.prob_floor
    fp, _, _ = model.encode_batch(batch.positive_ids, batch.positive_lengths)
    fn, _, _ = model.encode_batch(batch.negative_ids, batch.negative_lengths)

    device = batch.positive_ids.device
    n = len(batch)
    label_pos = torch.full((n,), class_for_rating(5, cfg.num_classes), device=device)
    label_neg = torch.full((n,), class_for_rating(1, cfg.num_classes), device=device)

    rec = sequence_nll(model, fp.combined, batch.positive_ids, batch.positive_lengths)
    rec = rec + sequence_nll(model, fn.combined, batch.negative_ids, batch.negative_lengths)

    emo = _cross_entropy(fp.class_probs, label_pos, floor)
    emo = emo + _cross_entropy(fn.class_probs, label_neg, floor)

    row_probs = model.classify(model.label_embeddings)
    row_labels = torch.arange(cfg.num_classes, device=device)
    label_loss = -_log(row_probs.gather(-1, row_labels.unsqueeze(-1)).squeeze(-1), floor).sum()

    neutral = uniform_kl(model.classify(fp.content), floor).mean()
    neutral = neutral + uniform_kl(model.classify(fn.content), floor).mean()

    distance = (
        2.0 + cosine(fp.sentiment, fn.sentiment) - cosine(fp.content, fn.content)
    ).mean()

    cross_pos = torch.cat([fp.replaced_sentiment, fn.content], dim=-1)
    cross_neg = torch.cat([fn.replaced_sentiment, fp.content], dim=-1)
    counter = sequence_nll(model, cross_pos, batch.positive_ids, batch.positive_lengths)
    counter = counter + sequence_nll(model, cross_neg, batch.negative_ids, batch.negative_lengths)

    terms = {
        "L_rec": rec,
        "L_e": emo,
        "L_n": neutral,
        "L_r": label_loss,
        "L_dis": distance,
        "L_cf": counter,
    }
    return PairForward(positive=fp, negative=fn, terms=terms)


def loss_reconstruction(model, batch: PairBatch) -> Tensor:
    return forward_pair_batch(model, batch).terms["L_rec"]


def loss_emotion(model, batch: PairBatch) -> Tensor:
    terms = forward_pair_batch(model, batch).terms
    return terms["L_e"] + terms["L_r"]


def loss_neutrality(model, batch: PairBatch) -> Tensor:
    return forward_pair_batch(model, batch).terms["L_n"]


def loss_distance(factors_p: LatentFactors, factors_n: LatentFactors) -> Tensor:
    return (
        2.0
        + cosine(factors_p.sentiment, factors_n.sentiment)
        - cosine(factors_p.content, factors_n.content)
    ).mean()


def loss_counterfactual(model, batch: PairBatch) -> Tensor:
    return forward_pair_batch(model, batch).terms["L_cf"]


def loss_total(
    model, batch: PairBatch, alpha: float, beta: float, gamma: float
) -> tuple[Tensor, dict[str, Tensor]]:
    """Weighted combination of all terms plus the per-term breakdown."""
    if min(alpha, beta, gamma) < 0:
        raise ValueError("loss weights must be non-negative")
    terms = forward_pair_batch(model, batch).terms
    total = (
        terms["L_rec"]
        + alpha * (terms["L_e"] + terms["L_n"] + terms["L_r"])
        + beta * terms["L_dis"]
        + gamma * terms["L_cf"]
    )
    breakdown = dict(terms)
    breakdown["total"] = total
    return total, breakdown


def review_loss_total(
    model, batch: ReviewBatch, alpha: float
) -> tuple[Tensor, dict[str, Tensor]]:
    """Pair-free objective for rated reviews: reconstruction plus emotion terms.

    Used when the model is trained as a plain (summarizer) autoencoder on a
    review corpus; the pair-relational terms have no analogue here.
    """
    cfg = model.config
    floor = cfg.prob_floor
    factors, _, _ = model.encode_batch(batch.ids, batch.lengths)
    rec = sequence_nll(model, factors.combined, batch.ids, batch.lengths)
    emo = _cross_entropy(factors.class_probs, batch.labels, floor)
    neutral = uniform_kl(model.classify(factors.content), floor).mean()
    row_probs = model.classify(model.label_embeddings)
    row_labels = torch.arange(cfg.num_classes, device=batch.ids.device)
    label_loss = -_log(row_probs.gather(-1, row_labels.unsqueeze(-1)).squeeze(-1), floor).sum()
    total = rec + alpha * (emo + neutral + label_loss)
    zero = torch.zeros((), device=batch.ids.device, dtype=rec.dtype)
    breakdown = {
        "L_rec": rec,
        "L_e": emo,
        "L_n": neutral,
        "L_r": label_loss,
        "L_dis": zero,
        "L_cf": zero,
        "total": total,
    }
    return total, breakdown
