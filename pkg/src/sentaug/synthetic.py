"""Synthetic review grammar: content slots crossed with polarity lexicons.

Generates toy corpora whose sentiment and content words are separable by
construction, so disentanglement and debiasing effects can be measured
quickly on a workstation. Sentiment slots are realized from lexicons that
are aligned index-by-index across polarities, and the lexicon index is
derived from the content slots; polarity is therefore the only free
sentiment information in a text, and a fully content-only latent code
exists for every sentence.
"""

from __future__ import annotations

import hashlib
import random

from .corpus import CounterfactualPair, Review, ReviewSet

NOUNS = [
    "tights", "shoes", "camera", "phone", "blender", "jacket",
    "headphones", "kettle", "backpack", "lamp", "keyboard", "mattress",
]

ASPECTS = [
    "fabric", "battery", "lens", "screen", "motor", "zipper",
    "sound", "handle", "strap", "switch", "keys", "padding",
]

# Aligned by index: POS_ADJS[i] flips to NEG_ADJS[i] and back.
POS_ADJS = [
    "great", "excellent", "lovely", "wonderful", "perfect", "sturdy",
    "soft", "bright", "quick", "quiet", "fresh", "smooth",
]
NEG_ADJS = [
    "terrible", "awful", "horrible", "dreadful", "useless", "flimsy",
    "stiff", "dim", "slow", "noisy", "stale", "rough",
]

POS_VERBS = ["love", "recommend", "enjoy"]
NEG_VERBS = ["hate", "avoid", "regret"]

POS_ADVS = ["perfectly", "nicely", "reliably"]
NEG_ADVS = ["poorly", "badly", "erratically"]

NEUTRAL_ADJS = ["okay", "average", "ordinary", "plain", "acceptable", "standard"]
NEUTRAL_VERBS = ["kept", "used", "tried"]
NEUTRAL_ADVS = ["normally", "typically", "adequately"]

FLIP_MAP = {
    **dict(zip(POS_ADJS, NEG_ADJS)),
    **dict(zip(POS_VERBS, NEG_VERBS)),
    **dict(zip(POS_ADVS, NEG_ADVS)),
}

# One or two sentiment slots diluted among many content tokens.
_TEMPLATES = [
    "my daughter uses the {noun} every day and the {aspect} is {adj0}",
    "we bought this {noun} last month and i {verb} how the {aspect} turned out",
    "after two weeks with the {noun} i can say the {aspect} works {adv}",
    "the {aspect} on the new {noun} is {adj0} compared to the old model",
    "ordered the {noun} for a trip , the {aspect} seemed {adj0} from day one",
    "this {noun} replaced our old one and the {aspect} still looks {adj0}",
]

_LEXICONS = {
    "positive": (POS_ADJS, POS_VERBS, POS_ADVS),
    "negative": (NEG_ADJS, NEG_VERBS, NEG_ADVS),
    "neutral": (NEUTRAL_ADJS, NEUTRAL_VERBS, NEUTRAL_ADVS),
}


def _content_hash(*parts: str) -> int:
    digest = hashlib.md5("|".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def _realize(rng: random.Random, product_index: int, polarity: str) -> str:
    noun = NOUNS[product_index % len(NOUNS)]
    aspect = rng.choice(ASPECTS)
    t = rng.randrange(len(_TEMPLATES))
    adjs, verbs, advs = _LEXICONS[polarity]
    # Lexicon indices derive from the content slots, so the only free
    # sentiment information in a sentence is its polarity.
    base = _content_hash(noun, aspect, str(t))
    return _TEMPLATES[t].format(
        noun=noun,
        aspect=aspect,
        adj0=adjs[base % len(adjs)],
        verb=verbs[base % len(verbs)],
        adv=advs[base % len(advs)],
    )


def flip_polarity(text: str) -> str:
    """Swap sentiment words using the aligned lexicons (both directions)."""
    reverse = {v: k for k, v in FLIP_MAP.items()}
    out = []
    for word in text.split(" "):
        if word in FLIP_MAP:
            out.append(FLIP_MAP[word])
        elif word in reverse:
            out.append(reverse[word])
        else:
            out.append(word)
    return " ".join(out)


def make_pair_corpus(n_pairs: int, seed: int = 0, n_products: int = 12) -> list[CounterfactualPair]:
    """Counterfactual pairs sharing content slots, opposite polarity lexicon."""
    rng = random.Random(seed)
    pairs = []
    for i in range(n_pairs):
        product_index = rng.randrange(n_products)
        product_id = f"p{product_index:02d}"
        pos_text = _realize(rng, product_index, "positive")
        neg_text = flip_polarity(pos_text)
        pairs.append(
            CounterfactualPair(
                positive=Review(f"sp{i:05d}", product_id, pos_text, 5),
                negative=Review(f"sn{i:05d}", product_id, neg_text, 1),
                origin="manual",
            )
        )
    return pairs


def make_review_corpus(
    n_reviews: int,
    seed: int = 0,
    positive_fraction: float = 0.85,
    neutral_fraction: float = 0.05,
    n_products: int = 12,
    id_prefix: str = "r",
) -> ReviewSet:
    """Rated toy reviews with a configurable (biased) polarity mix."""
    rng = random.Random(seed)
    reviews = ReviewSet()
    for i in range(n_reviews):
        product_index = rng.randrange(n_products)
        product_id = f"p{product_index:02d}"
        u = rng.random()
        if u < positive_fraction:
            rating = rng.choice((4, 5))
            text = _realize(rng, product_index, "positive")
        elif u < positive_fraction + neutral_fraction:
            rating = 3
            text = _realize(rng, product_index, "neutral")
        else:
            rating = rng.choice((1, 2))
            text = _realize(rng, product_index, "negative")
        reviews.add(Review(f"{id_prefix}{i:05d}", product_id, text, rating))
    return reviews


def make_review_groups(
    n_groups: int,
    polarity: str,
    seed: int = 0,
    group_size_range: tuple[int, int] = (7, 8),
) -> list[list[Review]]:
    """Groups of same-polarity reviews about one product (summarization inputs)."""
    rng = random.Random(seed)
    rating = 5 if polarity == "positive" else 1
    groups = []
    for g in range(n_groups):
        product_index = rng.randrange(len(NOUNS))
        product_id = f"p{product_index:02d}"
        size = rng.randint(*group_size_range)
        group = [
            Review(f"g{g:03d}x{k}", product_id, _realize(rng, product_index, polarity), rating)
            for k in range(size)
        ]
        groups.append(group)
    return groups
