"""Review corpus handling: loading, tokenization, vocabulary, rating statistics."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

PAD, BOS, EOS, UNK = 0, 1, 2, 3
PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN = "<pad>", "<s>", "</s>", "<unk>"
SPECIAL_TOKENS = (PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN)

PAIR_ORIGINS = ("llm_rewrite", "dis_ae", "manual")

_WORD_RE = re.compile(r"\w+|[^\w\s]")


class CorpusError(Exception):
    """Malformed review or pair data."""


def word_tokens(text: str) -> list[str]:
    """Lowercased word-level tokens, punctuation split off as separate tokens."""
    return _WORD_RE.findall(text.lower())


@dataclass(frozen=True)
class Review:
    review_id: str
    product_id: str
    text: str
    rating: int

    def __post_init__(self):
        if self.rating not in (1, 2, 3, 4, 5):
            raise CorpusError(f"rating must be in 1..5, got {self.rating!r}")
        if not self.text.strip():
            raise CorpusError(f"review {self.review_id!r} has empty text")

    def to_record(self) -> dict:
        return {
            "review_id": self.review_id,
            "product_id": self.product_id,
            "text": self.text,
            "rating": self.rating,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Review":
        missing = [k for k in ("review_id", "product_id", "text", "rating") if k not in record]
        if missing:
            raise CorpusError(f"record missing keys {missing}")
        rating = record["rating"]
        if not isinstance(rating, int) or isinstance(rating, bool):
            raise CorpusError(f"rating must be an integer, got {rating!r}")
        return cls(
            review_id=str(record["review_id"]),
            product_id=str(record["product_id"]),
            text=str(record["text"]),
            rating=rating,
        )


class ReviewSet:
    """Ordered collection of reviews, indexed by product id."""

    def __init__(self, reviews=()):
        self.reviews: list[Review] = []
        self._by_product: dict[str, list[Review]] = {}
        self._ids: set[str] = set()
        for r in reviews:
            self.add(r)

    def add(self, review: Review):
        if review.review_id in self._ids:
            raise CorpusError(f"duplicate review_id {review.review_id!r}")
        self._ids.add(review.review_id)
        self.reviews.append(review)
        self._by_product.setdefault(review.product_id, []).append(review)

    def for_product(self, product_id: str) -> list[Review]:
        return list(self._by_product.get(product_id, []))

    @property
    def product_ids(self) -> list[str]:
        return list(self._by_product)

    def __len__(self):
        return len(self.reviews)

    def __iter__(self):
        return iter(self.reviews)

    def __contains__(self, review_id: str):
        return review_id in self._ids


@dataclass(frozen=True)
class CounterfactualPair:
    """Positive/negative review pair with shared content and opposite polarity."""

    positive: Review
    negative: Review
    origin: str

    def __post_init__(self):
        if self.positive.rating != 5:
            raise CorpusError(f"positive side must have rating 5, got {self.positive.rating}")
        if self.negative.rating != 1:
            raise CorpusError(f"negative side must have rating 1, got {self.negative.rating}")
        if self.positive.product_id != self.negative.product_id:
            raise CorpusError("pair members must share a product_id")
        if self.origin not in PAIR_ORIGINS:
            raise CorpusError(f"unknown pair origin {self.origin!r}")

    def to_record(self) -> dict:
        return {
            "positive": self.positive.to_record(),
            "negative": self.negative.to_record(),
            "origin": self.origin,
        }

    @classmethod
    def from_record(cls, record: dict) -> "CounterfactualPair":
        for key in ("positive", "negative", "origin"):
            if key not in record:
                raise CorpusError(f"pair record missing key {key!r}")
        return cls(
            positive=Review.from_record(record["positive"]),
            negative=Review.from_record(record["negative"]),
            origin=record["origin"],
        )


@dataclass(frozen=True)
class DistributionStats:
    total: int
    positive_fraction: float
    histogram: dict[int, int]

    def to_record(self) -> dict:
        return {
            "total": self.total,
            "positive_fraction": self.positive_fraction,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
        }


class Vocabulary:
    """Word-level vocabulary with fixed special ids and an UNK sink."""

    def __init__(self, tokens, min_freq: int = 1):
        self.min_freq = min_freq
        self.token_to_id: dict[str, int] = {t: i for i, t in enumerate(SPECIAL_TOKENS)}
        for tok in tokens:
            if tok in self.token_to_id:
                raise CorpusError(f"token {tok!r} collides with a special token")
            self.token_to_id[tok] = len(self.token_to_id)
        self.id_to_token: dict[int, str] = {i: t for t, i in self.token_to_id.items()}

    def __len__(self):
        return len(self.token_to_id)

    def __contains__(self, token: str):
        return token in self.token_to_id

    @property
    def tokens(self) -> list[str]:
        """Non-special tokens in id order (for serialization)."""
        return [self.id_to_token[i] for i in range(len(SPECIAL_TOKENS), len(self.token_to_id))]

    def id_for(self, token: str) -> int:
        return self.token_to_id.get(token, UNK)

    def token_for(self, idx: int) -> str:
        return self.id_to_token[idx]


def load_reviews(path, format: str = "jsonl") -> ReviewSet:
    """Load a review file into a ReviewSet, preserving order.

    ``jsonl`` expects one JSON record per line; ``json`` a single array of
    records. Malformed lines raise CorpusError naming the line number.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"review file not found: {path}")
    reviews = ReviewSet()
    if format == "jsonl":
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    reviews.add(Review.from_record(record))
                except (json.JSONDecodeError, CorpusError) as exc:
                    raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    elif format == "json":
        records = json.loads(path.read_text(encoding="utf-8"))
        for i, record in enumerate(records):
            try:
                reviews.add(Review.from_record(record))
            except CorpusError as exc:
                raise CorpusError(f"{path}: record {i}: {exc}") from exc
    else:
        raise ValueError(f"unknown review file format {format!r}")
    return reviews


def save_reviews(reviews, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for r in reviews:
            fh.write(json.dumps(r.to_record(), ensure_ascii=False) + "\n")


def load_pairs(path) -> list[CounterfactualPair]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"pair file not found: {path}")
    pairs = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                pairs.append(CounterfactualPair.from_record(json.loads(line)))
            except (json.JSONDecodeError, CorpusError) as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    return pairs


def save_pairs(pairs, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(json.dumps(p.to_record(), ensure_ascii=False) + "\n")


def compute_distribution(review_set: ReviewSet) -> DistributionStats:
    """Per-rating histogram and the fraction of reviews rated above 3."""
    histogram = {r: 0 for r in (1, 2, 3, 4, 5)}
    for review in review_set:
        histogram[review.rating] += 1
    total = len(review_set)
    positive = histogram[4] + histogram[5]
    fraction = positive / total if total else 0.0
    return DistributionStats(total=total, positive_fraction=fraction, histogram=histogram)


def build_vocab(review_set: ReviewSet, min_freq: int = 2) -> Vocabulary:
    """Vocabulary over tokens with corpus frequency >= min_freq."""
    if min_freq < 1:
        raise ValueError(f"min_freq must be >= 1, got {min_freq}")
    counts = Counter()
    for review in review_set:
        counts.update(word_tokens(review.text))
    kept = sorted((t for t, c in counts.items() if c >= min_freq), key=lambda t: (-counts[t], t))
    return Vocabulary(kept, min_freq=min_freq)


def tokenize(text: str, vocab: Vocabulary, max_len: int | None = None) -> list[int]:
    """Encode text as [BOS, token ids..., EOS]; OOV tokens map to UNK."""
    ids = [vocab.id_for(t) for t in word_tokens(text)]
    if max_len is not None:
        ids = ids[:max_len]
    return [BOS] + ids + [EOS]


def detokenize(ids, vocab: Vocabulary) -> str:
    """Inverse of tokenize up to canonical whitespace; strips special tokens."""
    words = [vocab.token_for(i) for i in ids if i not in (PAD, BOS, EOS)]
    return " ".join(words)


def select_rewrite_sources(review_set: ReviewSet) -> list[Review]:
    """Reviews with the top rating, in corpus order: the rewrite inputs."""
    return [r for r in review_set if r.rating == 5]
