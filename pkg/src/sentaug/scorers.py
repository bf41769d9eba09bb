"""Reference fluency and sentiment scorers.

These are offline stand-ins trained on the working corpus; external models
(a transformer perplexity scorer, a pretrained sentiment classifier) plug in
behind the same interfaces.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Protocol

import numpy as np
from scipy import sparse
from sklearn.feature_extraction.text import CountVectorizer
from sklearn.linear_model import LogisticRegression

from .corpus import BOS_TOKEN, EOS_TOKEN, ReviewSet, word_tokens

NEGATIVE = "negative"
NON_NEGATIVE = "non_negative"
NEUTRAL = "neutral"
POSITIVE = "positive"

POSITIVE_LEXICON = frozenset(
    """good great excellent wonderful lovely amazing perfect fantastic superb
    best nice happy love enjoy recommend fresh sturdy soft bright quick quiet
    smooth comfortable reliable pleasant delicious friendly clean
    perfectly nicely reliably""".split()
)

NEGATIVE_LEXICON = frozenset(
    """bad terrible awful horrible dreadful useless worst poor disappointing
    broken hate avoid regret flimsy stiff dim slow noisy stale rough
    uncomfortable unreliable unpleasant dirty rude badly poorly erratically""".split()
)


class FluencyScorer(Protocol):
    def score(self, text: str) -> float:
        """Perplexity of the text; lower is more fluent."""
        ...


class SentimentJudge(Protocol):
    def judge(self, text: str) -> str:
        """Binary polarity verdict: ``negative`` or ``non_negative``."""
        ...


class ThreeWayJudge(Protocol):
    def judge3(self, text: str) -> str:
        """Ternary verdict: ``positive``, ``neutral`` or ``negative``."""
        ...


class NgramFluencyScorer:
    """Order-3 add-one-smoothed language model; PPL = exp(mean token NLL)."""

    def __init__(self, texts=(), vocabulary=None):
        self._tri = Counter()
        self._bi = Counter()
        vocab = set(vocabulary) if vocabulary is not None else set()
        for text in texts:
            tokens = word_tokens(text) + [EOS_TOKEN]
            vocab.update(tokens)
            context = (BOS_TOKEN, BOS_TOKEN)
            for tok in tokens:
                self._tri[context + (tok,)] += 1
                self._bi[context] += 1
                context = (context[1], tok)
        if not vocab:
            raise ValueError("fluency scorer needs a non-empty vocabulary")
        self.vocab_size = len(vocab)

    def score(self, text: str) -> float:
        tokens = word_tokens(text) + [EOS_TOKEN]
        nll = 0.0
        context = (BOS_TOKEN, BOS_TOKEN)
        for tok in tokens:
            p = (self._tri[context + (tok,)] + 1) / (self._bi[context] + self.vocab_size)
            nll -= math.log(p)
            context = (context[1], tok)
        return math.exp(nll / len(tokens))


def _lexicon_counts(texts) -> np.ndarray:
    rows = []
    for text in texts:
        tokens = word_tokens(text)
        rows.append(
            [
                sum(t in POSITIVE_LEXICON for t in tokens),
                sum(t in NEGATIVE_LEXICON for t in tokens),
            ]
        )
    return np.asarray(rows, dtype=np.float64)


class BowSentimentJudge:
    """Bag-of-words logistic classifier: rating <= 2 vs rating >= 4.

    Independent of the generation model, so it cannot rubber-stamp that
    model's own outputs.
    """

    def __init__(self, texts, labels):
        self._vectorizer = CountVectorizer(analyzer=word_tokens, binary=True)
        features = self._vectorizer.fit_transform(texts)
        self._clf = LogisticRegression(solver="liblinear", random_state=0)
        self._clf.fit(features, labels)

    @classmethod
    def from_reviews(cls, reviews: ReviewSet) -> "BowSentimentJudge":
        texts, labels = [], []
        for r in reviews:
            if r.rating <= 2:
                texts.append(r.text)
                labels.append(NEGATIVE)
            elif r.rating >= 4:
                texts.append(r.text)
                labels.append(NON_NEGATIVE)
        if len(set(labels)) < 2:
            raise ValueError("corpus must contain both polarities to train the judge")
        return cls(texts, labels)

    def judge(self, text: str) -> str:
        features = self._vectorizer.transform([text])
        return str(self._clf.predict(features)[0])


class HybridThreeWayJudge:
    """Lexicon/logistic hybrid over BOW plus polarity-lexicon count features.

    Classes come from ratings: <= 2 negative, 3 neutral, >= 4 positive.
    """

    def __init__(self, texts, labels):
        self._vectorizer = CountVectorizer(analyzer=word_tokens, binary=True)
        bow = self._vectorizer.fit_transform(texts)
        features = sparse.hstack([bow, sparse.csr_matrix(_lexicon_counts(texts))], format="csr")
        self._clf = LogisticRegression(solver="lbfgs", max_iter=2000, random_state=0)
        self._clf.fit(features, labels)

    @classmethod
    def from_reviews(cls, reviews: ReviewSet) -> "HybridThreeWayJudge":
        texts, labels = [], []
        for r in reviews:
            texts.append(r.text)
            if r.rating <= 2:
                labels.append(NEGATIVE)
            elif r.rating == 3:
                labels.append(NEUTRAL)
            else:
                labels.append(POSITIVE)
        if len(set(labels)) < 2:
            raise ValueError("corpus must contain at least two sentiment classes")
        return cls(texts, labels)

    def judge3(self, text: str) -> str:
        bow = self._vectorizer.transform([text])
        features = sparse.hstack([bow, sparse.csr_matrix(_lexicon_counts([text]))], format="csr")
        return str(self._clf.predict(features)[0])
