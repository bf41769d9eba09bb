import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sentaug.corpus import (
    BOS,
    EOS,
    UNK,
    CorpusError,
    CounterfactualPair,
    Review,
    ReviewSet,
    build_vocab,
    compute_distribution,
    detokenize,
    load_pairs,
    load_reviews,
    save_pairs,
    save_reviews,
    select_rewrite_sources,
    tokenize,
    word_tokens,
)


def make_set(ratings):
    return ReviewSet(
        Review(f"r{i}", f"p{i % 3}", f"review number {i}", r) for i, r in enumerate(ratings)
    )


class TestReview:
    def test_rating_out_of_range(self):
        with pytest.raises(CorpusError):
            Review("r1", "p1", "text", 7)

    def test_empty_text(self):
        with pytest.raises(CorpusError):
            Review("r1", "p1", "   ", 3)

    def test_non_integer_rating_rejected(self):
        with pytest.raises(CorpusError):
            Review.from_record(
                {"review_id": "r1", "product_id": "p1", "text": "x", "rating": "5"}
            )


class TestPair:
    def test_positive_must_be_five(self):
        pos = Review("a", "p", "good", 4)
        neg = Review("b", "p", "bad", 1)
        with pytest.raises(CorpusError):
            CounterfactualPair(pos, neg, "manual")

    def test_products_must_match(self):
        pos = Review("a", "p", "good", 5)
        neg = Review("b", "q", "bad", 1)
        with pytest.raises(CorpusError):
            CounterfactualPair(pos, neg, "manual")

    def test_unknown_origin(self):
        pos = Review("a", "p", "good", 5)
        neg = Review("b", "p", "bad", 1)
        with pytest.raises(CorpusError):
            CounterfactualPair(pos, neg, "gpt")


class TestLoadReviews:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert len(load_reviews(path)) == 0

    def test_single_record(self, tmp_path):
        path = tmp_path / "one.jsonl"
        record = {"review_id": "r1", "product_id": "p1", "text": "great tights", "rating": 5}
        path.write_text(json.dumps(record) + "\n")
        reviews = load_reviews(path)
        assert len(reviews) == 1
        assert reviews.reviews[0].text == "great tights"

    def test_bad_rating_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        good = {"review_id": "r1", "product_id": "p1", "text": "fine", "rating": 3}
        bad = {"review_id": "r2", "product_id": "p1", "text": "x", "rating": 7}
        path.write_text(json.dumps(good) + "\n" + json.dumps(bad) + "\n")
        with pytest.raises(CorpusError, match=":2"):
            load_reviews(path)

    def test_missing_key_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps({"review_id": "r1", "product_id": "p1", "rating": 3}) + "\n")
        with pytest.raises(CorpusError, match=":1"):
            load_reviews(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_reviews(tmp_path / "nope.jsonl")

    def test_duplicate_ids_rejected(self, tmp_path):
        path = tmp_path / "dup.jsonl"
        record = {"review_id": "r1", "product_id": "p1", "text": "x y", "rating": 3}
        path.write_text(json.dumps(record) + "\n" + json.dumps(record) + "\n")
        with pytest.raises(CorpusError):
            load_reviews(path)

    def test_round_trip(self, tmp_path):
        reviews = make_set([5, 3, 1])
        path = tmp_path / "out.jsonl"
        save_reviews(reviews, path)
        loaded = load_reviews(path)
        assert [r.to_record() for r in loaded] == [r.to_record() for r in reviews]


def test_pair_file_round_trip(tmp_path):
    pos = Review("a", "p", "great product", 5)
    neg = Review("b", "p", "awful product", 1)
    pairs = [CounterfactualPair(pos, neg, "llm_rewrite")]
    path = tmp_path / "pairs.jsonl"
    save_pairs(pairs, path)
    assert load_pairs(path) == pairs


class TestDistribution:
    def test_two_of_three_positive(self):
        stats = compute_distribution(make_set([5, 4, 1]))
        assert stats.positive_fraction == pytest.approx(2 / 3)
        assert stats.total == 3

    def test_all_negative(self):
        assert compute_distribution(make_set([1, 1, 1])).positive_fraction == 0.0

    def test_empty(self):
        stats = compute_distribution(ReviewSet())
        assert stats.total == 0
        assert stats.positive_fraction == 0.0

    @given(st.lists(st.integers(min_value=1, max_value=5), max_size=60))
    def test_histogram_sums_and_fraction(self, ratings):
        stats = compute_distribution(make_set(ratings))
        assert sum(stats.histogram.values()) == stats.total == len(ratings)
        expected = stats.histogram[4] + stats.histogram[5]
        assert stats.positive_fraction * max(stats.total, 1) == pytest.approx(expected)


class TestVocab:
    def test_min_freq_cutoff(self):
        reviews = ReviewSet([Review("r1", "p1", "a a b", 3)])
        vocab = build_vocab(reviews, min_freq=2)
        assert "a" in vocab and "b" not in vocab

    def test_min_freq_one_keeps_all(self):
        reviews = ReviewSet([Review("r1", "p1", "a a b", 3)])
        vocab = build_vocab(reviews, min_freq=1)
        assert "a" in vocab and "b" in vocab

    def test_empty_corpus_only_specials(self):
        assert len(build_vocab(ReviewSet(), min_freq=2)) == 4

    def test_min_freq_validation(self):
        with pytest.raises(ValueError):
            build_vocab(ReviewSet(), min_freq=0)


class TestTokenize:
    @pytest.fixture
    def vocab(self):
        reviews = ReviewSet([Review("r1", "p1", "the cat sat on the mat .", 3)])
        return build_vocab(reviews, min_freq=1)

    def test_round_trip_in_vocab(self, vocab):
        text = "the cat sat on the mat ."
        assert detokenize(tokenize(text, vocab), vocab) == text

    def test_unknown_maps_to_unk(self, vocab):
        ids = tokenize("the dog", vocab)
        assert ids[2] == UNK

    def test_empty_string(self, vocab):
        assert tokenize("", vocab) == [BOS, EOS]

    def test_bos_eos_framing(self, vocab):
        ids = tokenize("cat", vocab)
        assert ids[0] == BOS and ids[-1] == EOS and len(ids) == 3

    def test_max_len_caps_words(self, vocab):
        ids = tokenize("the cat sat on the mat", vocab, max_len=2)
        assert len(ids) == 4  # BOS + 2 words + EOS

    @given(st.lists(st.sampled_from("the cat sat on mat .".split()), min_size=1, max_size=20))
    def test_round_trip_property(self, words):
        reviews = ReviewSet([Review("r1", "p1", "the cat sat on the mat .", 3)])
        vocab = build_vocab(reviews, min_freq=1)
        text = " ".join(words)
        assert detokenize(tokenize(text, vocab), vocab) == text


class TestSelectRewriteSources:
    def test_picks_fives_in_order(self):
        reviews = make_set([5, 3, 5, 1])
        chosen = select_rewrite_sources(reviews)
        assert [r.review_id for r in chosen] == ["r0", "r2"]

    def test_none(self):
        assert select_rewrite_sources(make_set([3, 1])) == []

    def test_all(self):
        assert len(select_rewrite_sources(make_set([5, 5]))) == 2

    @given(st.lists(st.integers(min_value=1, max_value=5), max_size=40))
    def test_subset_and_rating_property(self, ratings):
        reviews = make_set(ratings)
        chosen = select_rewrite_sources(reviews)
        assert all(r.rating == 5 for r in chosen)
        ids = {r.review_id for r in reviews}
        assert all(r.review_id in ids for r in chosen)


def test_word_tokens_lowercase_and_punct():
    assert word_tokens("Great tights!") == ["great", "tights", "!"]
