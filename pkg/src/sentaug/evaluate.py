"""Summary metrics: ROUGE-1/2/L, two-level sentiment precision, the Dif
aggregate, counterfactual-reconstruction ROUGE, and a mean-latent summarizer.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass

import torch

from .corpus import detokenize, tokenize, word_tokens
from .scorers import NEUTRAL, ThreeWayJudge

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


@dataclass(frozen=True)
class RougeVariant:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class RougeScore:
    r1: RougeVariant
    r2: RougeVariant
    rl: RougeVariant
    undefined: bool = False  # set when the reference was empty

    @classmethod
    def zeros(cls, undefined: bool = False) -> "RougeScore":
        z = RougeVariant(0.0, 0.0, 0.0)
        return cls(z, z, z, undefined=undefined)


def _f1(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def _ngram_variant(cand, ref, n) -> RougeVariant:
    cand_ngrams = Counter(tuple(cand[i : i + n]) for i in range(len(cand) - n + 1))
    ref_ngrams = Counter(tuple(ref[i : i + n]) for i in range(len(ref) - n + 1))
    overlap = sum((cand_ngrams & ref_ngrams).values())
    precision = overlap / max(sum(cand_ngrams.values()), 1) if cand_ngrams else 0.0
    recall = overlap / max(sum(ref_ngrams.values()), 1) if ref_ngrams else 0.0
    return RougeVariant(precision, recall, _f1(precision, recall))


def _lcs_length(a, b) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge(candidate: str, reference: str) -> RougeScore:
    """ROUGE-1/2 n-gram F1 and ROUGE-L (LCS) F1, lowercased word tokens."""
    ref = word_tokens(reference)
    if not ref:
        return RougeScore.zeros(undefined=True)
    cand = word_tokens(candidate)
    lcs = _lcs_length(cand, ref)
    precision = lcs / len(cand) if cand else 0.0
    recall = lcs / len(ref)
    return RougeScore(
        r1=_ngram_variant(cand, ref, 1),
        r2=_ngram_variant(cand, ref, 2),
        rl=RougeVariant(precision, recall, _f1(precision, recall)),
    )


def mean_rouge(scores) -> RougeScore:
    """Component-wise arithmetic mean of a non-empty score collection."""
    scores = list(scores)
    if not scores:
        raise ValueError("mean_rouge needs at least one score")

    def avg(variant):
        return RougeVariant(
            precision=sum(getattr(s, variant).precision for s in scores) / len(scores),
            recall=sum(getattr(s, variant).recall for s in scores) / len(scores),
            f1=sum(getattr(s, variant).f1 for s in scores) / len(scores),
        )

    return RougeScore(
        r1=avg("r1"), r2=avg("r2"), rl=avg("rl"),
        undefined=any(s.undefined for s in scores),
    )


def split_sentences(text: str) -> list[str]:
    """Split on terminal punctuation followed by whitespace."""
    return [s for s in (part.strip() for part in _SENTENCE_SPLIT.split(text)) if s]


def _verdict_score(verdict: str, polarity: str) -> float:
    if verdict == polarity:
        return 1.0
    if verdict == NEUTRAL:
        return 0.5
    return 0.0


@dataclass
class SentimentReport:
    review_level: float  # Rev
    sentence_level: float  # Sen
    polarity: str
    empty_summaries: int = 0


def sentiment_precision(summaries, judge3: ThreeWayJudge, polarity: str) -> SentimentReport:
    """Judge summaries whole (Rev) and sentence by sentence (Sen).

    Matching verdicts score 1, neutral 0.5, opposite 0; empty summaries
    score 0 and are flagged.
    """
    if polarity not in ("positive", "negative"):
        raise ValueError(f"polarity must be positive or negative, got {polarity!r}")
    summaries = list(summaries)
    if not summaries:
        raise ValueError("sentiment_precision needs at least one summary")
    rev_scores, sen_scores, empties = [], [], 0
    for summary in summaries:
        sentences = split_sentences(summary)
        if not summary.strip() or not sentences:
            empties += 1
            rev_scores.append(0.0)
            sen_scores.append(0.0)
            continue
        rev_scores.append(_verdict_score(judge3.judge3(summary), polarity))
        sen_scores.append(
            sum(_verdict_score(judge3.judge3(s), polarity) for s in sentences) / len(sentences)
        )
    return SentimentReport(
        review_level=sum(rev_scores) / len(rev_scores),
        sentence_level=sum(sen_scores) / len(sen_scores),
        polarity=polarity,
        empty_summaries=empties,
    )


def dif(base_rev: float, base_sen: float, new_rev: float, new_sen: float) -> float:
    """Mean change in review- and sentence-level sentiment accuracy (percent scale)."""
    return ((new_rev - base_rev) + (new_sen - base_sen)) / 2


@torch.no_grad()
def counterfactual_reconstruction_rouge(
    model,
    vocab,
    pairs,
    beam_width: int | None = None,
    max_len: int | None = None,
    max_encode_tokens: int = 128,
) -> RougeScore:
    """Decode each pair member from its partner's content latent and score
    the reconstruction against the original text; mean over both directions.
    """
    scores = []
    for pair in pairs:
        pos = model.encode(tokenize(pair.positive.text, vocab, max_encode_tokens))
        neg = model.encode(tokenize(pair.negative.text, vocab, max_encode_tokens))
        swapped_pos = torch.cat(
            [pos.factors.replaced_sentiment, neg.factors.content], dim=-1
        )
        swapped_neg = torch.cat(
            [neg.factors.replaced_sentiment, pos.factors.content], dim=-1
        )
        decoded_pos = detokenize(model.decode_beam(swapped_pos, beam_width, max_len), vocab)
        decoded_neg = detokenize(model.decode_beam(swapped_neg, beam_width, max_len), vocab)
        scores.append(rouge(decoded_pos, pair.positive.text))
        scores.append(rouge(decoded_neg, pair.negative.text))
    return mean_rouge(scores)


@torch.no_grad()
def summarize_mean(
    model,
    vocab,
    reviews,
    beam_width: int | None = None,
    max_len: int | None = None,
    max_encode_tokens: int = 128,
) -> str:
    """Beam-decode the mean of the reviews' combined latents.

    The latents are canonically sorted and averaged in double precision, so
    the result is exactly invariant to review order.
    """
    reviews = list(reviews)
    if not reviews:
        raise ValueError("summarize_mean needs at least one review")
    latents = [
        model.encode(tokenize(r.text, vocab, max_encode_tokens)).factors.combined
        for r in reviews
    ]
    rows = sorted(latents, key=lambda t: tuple(t.tolist()))
    mean = torch.stack([r.double() for r in rows]).mean(dim=0).to(latents[0].dtype)
    return detokenize(model.decode_beam(mean, beam_width, max_len), vocab)
