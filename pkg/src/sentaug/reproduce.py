"""Mass production of negative reviews by recombining parent latents.

A content parent (positive review of the target product) supplies the
content latent; a sentiment parent (any negative review) supplies the soft
sentiment replacement. Decoding the combination yields a candidate negative
review, which must pass fluency and sentiment filters to be kept.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass

import torch

from .corpus import CounterfactualPair, Review, ReviewSet, detokenize, tokenize
from .scorers import NEGATIVE, FluencyScorer, SentimentJudge

logger = logging.getLogger(__name__)

UNSCORED = "unscored"
NON_NEGATIVE = "non_negative"


@dataclass(frozen=True)
class FilterConfig:
    ppl_threshold: float = 125.0
    min_ppl_chars: int = 10  # shorter texts stay unscored

    def __post_init__(self):
        if self.ppl_threshold <= 0:
            raise ValueError("ppl_threshold must be positive")


@dataclass(frozen=True)
class ParentPair:
    content_parent: Review
    sentiment_parent: Review

    def __post_init__(self):
        if self.content_parent.rating < 4:
            raise ValueError("content parent must be a positive review (rating >= 4)")
        if self.sentiment_parent.rating > 2:
            raise ValueError("sentiment parent must be a negative review (rating <= 2)")


@dataclass
class SynthesisCandidate:
    text: str
    content_parent_id: str
    sentiment_parent_id: str
    ppl: float | None = None
    sentiment_verdict: str = UNSCORED
    kept: bool = False
    drop_reason: str | None = None


@dataclass
class FilterAudit:
    generated: int = 0
    kept: int = 0
    dropped_fluency: int = 0
    dropped_sentiment: int = 0

    def to_record(self) -> dict:
        return {
            "generated": self.generated,
            "kept": self.kept,
            "dropped_fluency": self.dropped_fluency,
            "dropped_sentiment": self.dropped_sentiment,
        }


def select_parents(
    review_set: ReviewSet,
    product_id: str,
    limit: int | None = None,
    seed: int = 0,
    content_min_rating: int = 4,
) -> list[ParentPair]:
    """Cross the product's positive reviews with seeded-sampled corpus-wide
    negatives, truncated to ``limit``."""
    product_reviews = review_set.for_product(product_id)
    if not product_reviews:
        raise ValueError(f"unknown product {product_id!r}")
    positives = [r for r in product_reviews if r.rating >= content_min_rating]
    negatives = [r for r in review_set if r.rating <= 2]
    if not positives:
        logger.warning("product %s has no positive reviews; nothing to synthesize", product_id)
        return []
    if not negatives:
        logger.warning("corpus has no negative reviews; nothing to synthesize")
        return []
    rng = random.Random(seed)
    shuffled = negatives[:]
    rng.shuffle(shuffled)
    pairs = [
        ParentPair(content_parent=p, sentiment_parent=n) for p in positives for n in shuffled
    ]
    return pairs if limit is None else pairs[:limit]


@torch.no_grad()
def synthesize(
    model,
    vocab,
    parent: ParentPair,
    beam_width: int | None = None,
    max_len: int | None = None,
    max_encode_tokens: int = 128,
) -> SynthesisCandidate:
    """Decode the content parent's content latent under the sentiment parent's
    soft sentiment replacement."""
    content = model.encode(tokenize(parent.content_parent.text, vocab, max_encode_tokens))
    sentiment = model.encode(tokenize(parent.sentiment_parent.text, vocab, max_encode_tokens))
    latent = torch.cat(
        [sentiment.factors.replaced_sentiment, content.factors.content], dim=-1
    )
    ids = model.decode_beam(latent, beam_width, max_len)
    return SynthesisCandidate(
        text=detokenize(ids, vocab),
        content_parent_id=parent.content_parent.review_id,
        sentiment_parent_id=parent.sentiment_parent.review_id,
    )


def compute_ppl(scorer: FluencyScorer, text: str, min_chars: int = 10) -> float | None:
    """Perplexity under the scorer; short texts and scorer failures stay unscored."""
    if len(text) < min_chars:
        return None
    try:
        return float(scorer.score(text))
    except Exception as exc:
        logger.warning("fluency scorer failed on %r: %s", text[:40], exc)
        return None


def _apply_filter(candidate: SynthesisCandidate, judge: SentimentJudge, cfg: FilterConfig) -> bool:
    if candidate.ppl is None or candidate.ppl > cfg.ppl_threshold:
        candidate.kept = False
        candidate.drop_reason = "fluency"
        return False
    candidate.sentiment_verdict = judge.judge(candidate.text)
    if candidate.sentiment_verdict != NEGATIVE:
        candidate.kept = False
        candidate.drop_reason = "sentiment"
        return False
    candidate.kept = True
    candidate.drop_reason = None
    return True


def filter_candidates(
    candidates, judge: SentimentJudge, cfg: FilterConfig
) -> tuple[list[SynthesisCandidate], FilterAudit]:
    """Retain candidates that are fluent (ppl <= threshold) and read negative."""
    audit = FilterAudit(generated=len(candidates))
    retained = []
    for candidate in candidates:
        if _apply_filter(candidate, judge, cfg):
            retained.append(candidate)
            audit.kept += 1
        elif candidate.drop_reason == "fluency":
            audit.dropped_fluency += 1
        else:
            audit.dropped_sentiment += 1
    return retained, audit


def reproduce(
    model,
    vocab,
    review_set: ReviewSet,
    products,
    per_product_quota: int,
    scorer: FluencyScorer,
    judge: SentimentJudge,
    cfg: FilterConfig,
    seed: int = 0,
    parent_limit: int | None = None,
    beam_width: int | None = None,
    max_len: int | None = None,
) -> tuple[list[CounterfactualPair], dict[str, FilterAudit]]:
    """Synthesize per-product negative reviews until each quota is met.

    Content parents are restricted to rating-5 reviews so the emitted pairs
    satisfy the pair contract (positive side rating 5). Returns the kept
    pairs (origin ``dis_ae``) plus a per-product filter audit.
    """
    pairs: list[CounterfactualPair] = []
    audits: dict[str, FilterAudit] = {}
    for index, product_id in enumerate(products):
        audit = FilterAudit()
        audits[product_id] = audit
        if per_product_quota <= 0:
            continue
        parent_seed = random.Random(f"{seed}:{index}:{product_id}").randrange(2**32)
        parents = select_parents(
            review_set, product_id, limit=parent_limit, seed=parent_seed, content_min_rating=5
        )
        kept = 0
        for parent in parents:
            if kept >= per_product_quota:
                break
            candidate = synthesize(model, vocab, parent, beam_width, max_len)
            candidate.ppl = compute_ppl(scorer, candidate.text, cfg.min_ppl_chars)
            audit.generated += 1
            if _apply_filter(candidate, judge, cfg):
                audit.kept += 1
                kept += 1
                negative = Review(
                    review_id=f"{candidate.content_parent_id}+{candidate.sentiment_parent_id}#synth",
                    product_id=product_id,
                    text=candidate.text,
                    rating=1,
                )
                pairs.append(
                    CounterfactualPair(
                        positive=parent.content_parent, negative=negative, origin="dis_ae"
                    )
                )
            elif candidate.drop_reason == "fluency":
                audit.dropped_fluency += 1
            else:
                audit.dropped_sentiment += 1
        if kept < per_product_quota:
            logger.warning(
                "product %s: quota unmet (%d of %d kept)", product_id, kept, per_product_quota
            )
    return pairs, audits
