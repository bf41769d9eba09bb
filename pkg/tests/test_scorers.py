import math

import pytest

from sentaug.corpus import Review, ReviewSet
from sentaug.scorers import (
    NEGATIVE,
    NEUTRAL,
    NON_NEGATIVE,
    POSITIVE,
    BowSentimentJudge,
    HybridThreeWayJudge,
    NgramFluencyScorer,
)
from sentaug.synthetic import make_review_corpus


class TestNgramScorer:
    def test_uniform_over_vocab_of_ten(self):
        scorer = NgramFluencyScorer(texts=(), vocabulary=[f"w{i}" for i in range(10)])
        assert scorer.score("anything at all here") == pytest.approx(10.0)
        assert scorer.score("w0 w1 w2") == pytest.approx(10.0)

    def test_trained_text_scores_below_uniform(self):
        text = "the fabric is great and soft"
        scorer = NgramFluencyScorer(texts=[text] * 5)
        assert scorer.score(text) < scorer.vocab_size

    def test_training_lowers_ppl_monotonically(self):
        # more repetitions -> every trigram probability rises -> lower PPL
        text = "the lamp is bright"
        vocabulary = set(text.split()) | {"extra", "words", "here"}
        few = NgramFluencyScorer([text] * 2, vocabulary=vocabulary)
        many = NgramFluencyScorer([text] * 50, vocabulary=vocabulary)
        assert many.score(text) < few.score(text)

    def test_empty_vocabulary_rejected(self):
        with pytest.raises(ValueError):
            NgramFluencyScorer(texts=())

    def test_ppl_positive_and_bounded_by_smoothing(self):
        scorer = NgramFluencyScorer(texts=["a b c"], vocabulary=["a", "b", "c", "d"])
        value = scorer.score("d d d d")
        assert 0 < value <= scorer.vocab_size * math.e


class TestBowJudge:
    def test_separates_synthetic_polarity(self):
        corpus = make_review_corpus(300, seed=1, positive_fraction=0.5, neutral_fraction=0.0)
        judge = BowSentimentJudge.from_reviews(corpus)
        held_out = make_review_corpus(60, seed=2, positive_fraction=0.5, neutral_fraction=0.0,
                                      id_prefix="h")
        correct = 0
        scored = 0
        for review in held_out:
            expected = NEGATIVE if review.rating <= 2 else NON_NEGATIVE
            scored += 1
            correct += judge.judge(review.text) == expected
        assert correct / scored > 0.9

    def test_single_class_corpus_rejected(self):
        corpus = ReviewSet([Review("r1", "p1", "great stuff here", 5)])
        with pytest.raises(ValueError):
            BowSentimentJudge.from_reviews(corpus)


class TestThreeWayJudge:
    def test_classifies_three_polarities(self):
        corpus = make_review_corpus(600, seed=3, positive_fraction=0.4, neutral_fraction=0.3)
        judge = HybridThreeWayJudge.from_reviews(corpus)
        held_out = make_review_corpus(90, seed=4, positive_fraction=0.4, neutral_fraction=0.3,
                                      id_prefix="h")
        correct = 0
        for review in held_out:
            expected = NEGATIVE if review.rating <= 2 else NEUTRAL if review.rating == 3 else POSITIVE
            correct += judge.judge3(review.text) == expected
        assert correct / len(held_out) > 0.85

    def test_two_class_corpus_still_trains(self):
        corpus = make_review_corpus(100, seed=5, positive_fraction=0.5, neutral_fraction=0.0)
        judge = HybridThreeWayJudge.from_reviews(corpus)
        assert judge.judge3("the fabric is great and lovely") in (POSITIVE, NEUTRAL, NEGATIVE)
